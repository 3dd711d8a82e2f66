//! Closed-form reference model: hard mirror | diamond | air | hard mirror.
//!
//! Matching sin-like standing waves at the diamond/air interface gives
//! `sin(n k t_d) cos(k t_a) + n cos(n k t_d) sin(k t_a) = 0`.
//! Used to cross-check the transfer-matrix resonance search.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub fn hard_mirror_condition(wavelength_nm: f64, n_d: f64, t_d_nm: f64, t_air_nm: f64) -> f64 {
    let k = 2.0 * PI / wavelength_nm;
    (n_d * k * t_d_nm).sin() * (k * t_air_nm).cos()
        + n_d * (n_d * k * t_d_nm).cos() * (k * t_air_nm).sin()
}

/// Roots of [`hard_mirror_condition`] in a wavelength window, by sign changes
/// on a fine grid followed by bisection.
pub fn hard_mirror_resonances(
    n_d: f64,
    t_d_nm: f64,
    t_air_nm: f64,
    window: (f64, f64),
) -> Result<Vec<f64>> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid("window", format!("[{lo}, {hi}] is empty")));
    }
    let f = |l: f64| hard_mirror_condition(l, n_d, t_d_nm, t_air_nm);
    // Phase changes by at most 2π(n t_d + t_a)/λ^2 per nm.
    let opt = n_d * t_d_nm + t_air_nm;
    let step = lo * lo / (2.0 * PI * opt) * 0.05;
    let n = ((hi - lo) / step).ceil() as usize + 1;
    let mut roots = Vec::new();
    let mut prev = (lo, f(lo));
    for i in 1..=n {
        let l = lo + (hi - lo) * i as f64 / n as f64;
        let cur = (l, f(l));
        if prev.1 == 0.0 {
            roots.push(prev.0);
        } else if prev.1 * cur.1 < 0.0 {
            let (mut a, mut b, fa0) = (prev.0, cur.0, prev.1);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if (f(m) > 0.0) == (fa0 > 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = cur;
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_membrane_reduces_to_empty_cavity() {
        let roots = hard_mirror_resonances(2.417, 0.0, 10_000.0, (700.0, 760.0)).unwrap();
        for r in roots {
            let q = 2.0 * 10_000.0 / r;
            assert!((q - q.round()).abs() < 1e-9);
        }
    }
}
