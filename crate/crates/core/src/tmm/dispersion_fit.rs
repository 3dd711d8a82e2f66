use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::resonance::{find_resonances, CavityModel, ResonanceSearch};
use crate::error::{Error, Result};
use crate::fit::{lm_fit, FitResult, LmOptions, ParamSpec, Residuals};
use crate::optics::CavityAssembly;

/// A measured resonance: positioner reading for the fiber gap and the peak
/// wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionPoint {
    pub gap_proxy_nm: f64,
    pub wavelength_nm: f64,
}

/// Membrane thickness, parasitic gap, and the offset that turns a gap proxy
/// into the physical fiber gap (gap = proxy + offset).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionGuess {
    pub membrane_nm: f64,
    pub gap2_nm: f64,
    pub gap_offset_nm: f64,
}

struct DispersionProblem<'a> {
    template: &'a CavityAssembly,
    points: &'a [DispersionPoint],
}

impl DispersionProblem<'_> {
    fn model(&self, p: &[f64], proxy: f64) -> Result<CavityModel> {
        let a = self
            .template
            .with_membrane_thickness(p[0])?
            .with_gap2(p[1])?
            .with_gap(proxy + p[2])?;
        Ok(CavityModel::new(&a))
    }
}

impl Residuals for DispersionProblem<'_> {
    fn len(&self) -> usize {
        self.points.len()
    }

    fn eval(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, pt) in out.iter_mut().zip(self.points) {
            let res = self
                .model(p, pt.gap_proxy_nm)?
                .resonance_near(pt.wavelength_nm)?;
            *o = res.wavelength_nm - pt.wavelength_nm;
        }
        Ok(())
    }
}

/// Least-squares fit of [t_d, t_g2, gap offset] to measured resonances.
///
/// Each point is predicted by the phase-condition root of the gap nearest
/// the measured wavelength (the order is therefore inherited from the data).
/// With `fit_gap2 = false` the parasitic gap is frozen at the guess.
pub fn fit_dispersion(
    template: &CavityAssembly,
    points: &[DispersionPoint],
    guess: &DispersionGuess,
    fit_gap2: bool,
) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} resonance points, need 4",
            points.len()
        )));
    }
    let problem = DispersionProblem { template, points };
    let p0 = [guess.membrane_nm, guess.gap2_nm, guess.gap_offset_nm];
    let mut orders = BTreeSet::new();
    for pt in points {
        orders.insert(
            problem
                .model(&p0, pt.gap_proxy_nm)?
                .resonance_near(pt.wavelength_nm)?
                .order,
        );
    }
    if orders.len() < 2 {
        return Err(Error::DegenerateData(
            "all resonances belong to one mode order".into(),
        ));
    }
    let specs = [
        ParamSpec::new("membrane_nm", guess.membrane_nm).bounded(1.0, 1e5),
        ParamSpec::new("gap2_nm", guess.gap2_nm)
            .bounded(0.0, 1e4)
            .fixed(!fit_gap2),
        ParamSpec::new("gap_offset_nm", guess.gap_offset_nm),
    ];
    let opts = LmOptions {
        fd_step: 1e-7,
        ..Default::default()
    };
    let mut res = lm_fit(
        if fit_gap2 {
            "dispersion"
        } else {
            "dispersion_fixed_gap2"
        },
        &problem,
        &specs,
        &opts,
    )?;
    let rms = (res.chi_squared / points.len() as f64).sqrt();
    res.push_derived("rms_residual_nm", rms, 0.0);
    Ok(res)
}

/// Resonances of `template` with `truth` applied, over a list of gap proxies,
/// with Gaussian wavelength noise.
pub fn synthesize_dispersion<R: Rng + ?Sized>(
    template: &CavityAssembly,
    truth: &DispersionGuess,
    gap_proxies_nm: &[f64],
    window: (f64, f64),
    noise_nm: f64,
    rng: &mut R,
) -> Result<Vec<DispersionPoint>> {
    let base = template
        .with_membrane_thickness(truth.membrane_nm)?
        .with_gap2(truth.gap2_nm)?;
    let normal = Normal::new(0.0, noise_nm.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::invalid("noise_nm", e.to_string()))?;
    let mut out = Vec::new();
    for &proxy in gap_proxies_nm {
        let a = base.with_gap(proxy + truth.gap_offset_nm)?;
        for p in find_resonances(&a, window, &ResonanceSearch::default())? {
            let noise = if noise_nm > 0.0 {
                normal.sample(rng)
            } else {
                0.0
            };
            out.push(DispersionPoint {
                gap_proxy_nm: proxy,
                wavelength_nm: p.wavelength_nm + noise,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_round_trip() {
        let template = CavityAssembly::reference(11_000.0).unwrap();
        let truth = DispersionGuess {
            membrane_nm: 1420.0,
            gap2_nm: 250.0,
            gap_offset_nm: 35.0,
        };
        let gaps: Vec<f64> = (0..16).map(|i| 11_000.0 + 100.0 * i as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pts =
            synthesize_dispersion(&template, &truth, &gaps, (725.0, 755.0), 0.0, &mut rng).unwrap();
        let guess = DispersionGuess {
            membrane_nm: 1410.0,
            gap2_nm: 230.0,
            gap_offset_nm: 0.0,
        };
        let r = fit_dispersion(&template, &pts, &guess, true).unwrap();
        assert!((r.value("membrane_nm") - 1420.0).abs() < 0.5, "{r:?}");
        assert!((r.value("gap2_nm") - 250.0).abs() < 2.0);
    }

    #[test]
    fn too_few_or_single_order_points_rejected() {
        let template = CavityAssembly::reference(11_000.0).unwrap();
        let guess = DispersionGuess {
            membrane_nm: 1420.0,
            gap2_nm: 250.0,
            gap_offset_nm: 0.0,
        };
        let model = CavityModel::new(&template);
        let r = model.resonance_near(737.0).unwrap();
        let one = DispersionPoint {
            gap_proxy_nm: 11_000.0,
            wavelength_nm: r.wavelength_nm,
        };
        assert!(matches!(
            fit_dispersion(&template, &[one; 3], &guess, true),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            fit_dispersion(&template, &[one; 5], &guess, true),
            Err(Error::DegenerateData(_))
        ));
    }
}
