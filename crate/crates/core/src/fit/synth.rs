//! Seeded synthetic traces for the fit models.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::decay::{DecayTrace, Emg};
use super::models::{CurveModel, DoubleLorentzian, SpectrumTrace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecaySynth {
    pub tau_ns: f64,
    /// Gaussian instrument response width; 0 gives an ideal step at `mu_ns`.
    pub sigma_irf_ns: f64,
    pub mu_ns: f64,
    /// Counts per bin just after the pulse.
    pub amplitude: f64,
    pub background: f64,
    pub bin_width_ns: f64,
    pub n_bins: usize,
}

impl Default for DecaySynth {
    fn default() -> Self {
        // Pulse half-way between two bins.
        Self {
            tau_ns: 1.36,
            sigma_irf_ns: 0.0,
            mu_ns: 2.01,
            amplitude: 1e4,
            background: 0.0,
            bin_width_ns: 0.02,
            n_bins: 1000,
        }
    }
}

/// Expected counts, Poisson-sampled when `rng` is given.
pub fn synthesize_decay<R: Rng + ?Sized>(
    cfg: &DecaySynth,
    rng: Option<&mut R>,
) -> Result<DecayTrace> {
    if !(cfg.tau_ns > 0.0
        && cfg.bin_width_ns > 0.0
        && cfg.sigma_irf_ns >= 0.0
        && cfg.amplitude >= 0.0)
    {
        return Err(Error::invalid(
            "decay synth",
            "tau, bin width > 0; sigma, amplitude >= 0",
        ));
    }
    let t: Vec<f64> = (0..cfg.n_bins)
        .map(|i| i as f64 * cfg.bin_width_ns)
        .collect();
    let mut counts: Vec<f64> = t
        .iter()
        .map(|&t| {
            let decay = if cfg.sigma_irf_ns == 0.0 {
                if t >= cfg.mu_ns {
                    cfg.amplitude * (-(t - cfg.mu_ns) / cfg.tau_ns).exp()
                } else {
                    0.0
                }
            } else {
                Emg.value(
                    t,
                    &[cfg.tau_ns, cfg.mu_ns, cfg.sigma_irf_ns, cfg.amplitude, 0.0],
                )
            };
            decay + cfg.background
        })
        .collect();
    if let Some(rng) = rng {
        for c in counts.iter_mut() {
            *c = if *c > 0.0 {
                Poisson::new(*c).expect("positive mean").sample(rng)
            } else {
                0.0
            };
        }
    }
    DecayTrace::new(t, counts)
}

/// Equal-width doublet on a wavelength grid with additive Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DoubletSynth {
    pub center1_nm: f64,
    pub center2_nm: f64,
    pub fwhm_nm: f64,
    pub amplitude1: f64,
    pub amplitude2: f64,
    pub offset: f64,
    pub lo_nm: f64,
    pub hi_nm: f64,
    pub points: usize,
    pub noise: f64,
}

impl Default for DoubletSynth {
    fn default() -> Self {
        Self {
            center1_nm: crate::constants::ZPL_AB_NM,
            center2_nm: crate::constants::ZPL_CD_NM,
            fwhm_nm: 0.3,
            amplitude1: 1.0,
            amplitude2: 0.8,
            offset: 0.05,
            lo_nm: 734.0,
            hi_nm: 740.0,
            points: 600,
            noise: 0.01,
        }
    }
}

pub fn synthesize_doublet<R: Rng + ?Sized>(
    cfg: &DoubletSynth,
    rng: &mut R,
) -> Result<SpectrumTrace> {
    if cfg.points < 8 || !(cfg.hi_nm > cfg.lo_nm) || !(cfg.noise >= 0.0) {
        return Err(Error::invalid(
            "doublet synth",
            "need >= 8 points, hi > lo, noise >= 0",
        ));
    }
    let p = [
        cfg.center1_nm,
        cfg.center2_nm,
        cfg.fwhm_nm,
        cfg.amplitude1,
        cfg.amplitude2,
        cfg.offset,
    ];
    let normal = Normal::new(0.0, cfg.noise.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let x: Vec<f64> = (0..cfg.points)
        .map(|i| cfg.lo_nm + (cfg.hi_nm - cfg.lo_nm) * i as f64 / (cfg.points - 1) as f64)
        .collect();
    let y = x
        .iter()
        .map(|&x| {
            DoubleLorentzian.value(x, &p)
                + if cfg.noise > 0.0 {
                    normal.sample(rng)
                } else {
                    0.0
                }
        })
        .collect();
    SpectrumTrace::new(x, y)
}

/// v(T) = v0 + c T³ sampled at `temperatures_k` with Gaussian noise.
pub fn synthesize_cubic_series<R: Rng + ?Sized>(
    v0: f64,
    cubic: f64,
    temperatures_k: &[f64],
    noise: f64,
    rng: &mut R,
) -> Vec<(f64, f64)> {
    let normal = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).expect("valid sigma");
    temperatures_k
        .iter()
        .map(|&t| {
            (
                t,
                v0 + cubic * t.powi(3) + if noise > 0.0 { normal.sample(rng) } else { 0.0 },
            )
        })
        .collect()
}
