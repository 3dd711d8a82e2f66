use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::response::stack_response;
use crate::error::{Error, Result};
use crate::optics::CavityAssembly;

/// Transmission on a (gap, wavelength) grid. `transmission` is row-major with
/// one row per gap: index `i_gap * wavelengths_nm.len() + i_lambda`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionMap {
    pub gaps_nm: Vec<f64>,
    pub wavelengths_nm: Vec<f64>,
    pub transmission: Vec<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

pub fn dispersion_map(
    assembly: &CavityAssembly,
    gap_range: (f64, f64),
    gap_steps: usize,
    wavelength_window: (f64, f64),
    wavelength_steps: usize,
) -> Result<DispersionMap> {
    if gap_steps < 2 || wavelength_steps < 2 {
        return Err(Error::invalid(
            "steps",
            "need at least 2 gaps and 2 wavelengths",
        ));
    }
    let gaps_nm = linspace(gap_range.0, gap_range.1, gap_steps);
    let wavelengths_nm = linspace(wavelength_window.0, wavelength_window.1, wavelength_steps);
    let rows: Vec<Vec<f64>> = gaps_nm
        .par_iter()
        .map(|&g| {
            let stack = assembly.with_gap(g)?.flatten();
            wavelengths_nm
                .iter()
                .map(|&l| stack_response(&stack, l).map(|r| r.transmittance))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(DispersionMap {
        gaps_nm,
        wavelengths_nm,
        transmission: rows.concat(),
    })
}

impl DispersionMap {
    pub fn get(&self, i_gap: usize, i_lambda: usize) -> f64 {
        self.transmission[i_gap * self.wavelengths_nm.len() + i_lambda]
    }

    pub fn row(&self, i_gap: usize) -> &[f64] {
        let n = self.wavelengths_nm.len();
        &self.transmission[i_gap * n..(i_gap + 1) * n]
    }

    /// Wavelength indices of strict local maxima along one row.
    pub fn row_maxima(&self, i_gap: usize) -> Vec<usize> {
        let r = self.row(i_gap);
        (1..r.len().saturating_sub(1))
            .filter(|&i| r[i] > r[i - 1] && r[i] >= r[i + 1])
            .collect()
    }

    /// CSV with header `gap_nm,wavelength_nm,T`, gap-major order.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "gap_nm,wavelength_nm,T")?;
        for (i, g) in self.gaps_nm.iter().enumerate() {
            for (j, l) in self.wavelengths_nm.iter().enumerate() {
                writeln!(out, "{g},{l},{:e}", self.get(i, j))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::Mirror;

    #[test]
    fn map_is_deterministic_and_ordered() {
        let a = CavityAssembly::reference(11_000.0).unwrap();
        let m1 = dispersion_map(&a, (11_000.0, 11_400.0), 5, (730.0, 745.0), 64).unwrap();
        let m2 = dispersion_map(&a, (11_000.0, 11_400.0), 5, (730.0, 745.0), 64).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(m1.transmission.len(), 5 * 64);
        assert_eq!(m1.gaps_nm[4], 11_400.0);
        let mut csv = Vec::new();
        m1.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 1 + 5 * 64);
        assert!(text.starts_with("gap_nm,wavelength_nm,T\n11000,730,"));
    }

    #[test]
    fn empty_cavity_ridges_are_straight() {
        // Ridge position follows λ = 2 L_opt / q with L_opt = gap + const.
        let a =
            CavityAssembly::empty(Mirror::fixture(), 10_000.0, Mirror::fixture(), 45.0).unwrap();
        let g0 = crate::tmm::CavityModel::new(&a)
            .resonant_gap_near(736.0, 10_000.0)
            .unwrap();
        let m = dispersion_map(&a, (g0, g0 + 20.0), 3, (735.0, 740.0), 5001).unwrap();
        let peak = |i| {
            let r = m.row(i);
            let j = (0..r.len()).max_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap();
            m.wavelengths_nm[j]
        };
        let (l0, l1, l2) = (peak(0), peak(1), peak(2));
        assert!(((l1 - l0) - (l2 - l1)).abs() <= 2.0 * (m.wavelengths_nm[1] - m.wavelengths_nm[0]));
    }

    #[test]
    fn too_few_steps_rejected() {
        let a = CavityAssembly::reference(11_000.0).unwrap();
        assert!(dispersion_map(&a, (1.0, 2.0), 1, (700.0, 710.0), 10).is_err());
    }
}
