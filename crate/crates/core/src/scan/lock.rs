use serde::{Deserialize, Serialize};

use super::{rms_about_mean, uniform_step};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LockState {
    Locked,
    Unlocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockMeta {
    pub wavelength_nm: f64,
    pub finesse: f64,
    /// Setpoint as a fraction of the peak transmission.
    #[serde(default = "half")]
    pub setpoint_fraction: f64,
    /// Transmission on resonance, detector units.
    #[serde(default = "one")]
    pub peak_transmission: f64,
    /// Samples at or above this fraction of the peak count as clipped.
    #[serde(default = "clip")]
    pub clip_fraction: f64,
}

fn half() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}
fn clip() -> f64 {
    0.98
}

impl LockMeta {
    pub fn new(wavelength_nm: f64, finesse: f64) -> Self {
        Self {
            wavelength_nm,
            finesse,
            setpoint_fraction: 0.5,
            peak_transmission: 1.0,
            clip_fraction: 0.98,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength_nm > 0.0 && self.finesse > 0.0 && self.peak_transmission > 0.0) {
            return Err(Error::invalid(
                "lock meta",
                "wavelength, finesse and peak transmission must be > 0",
            ));
        }
        if !(self.setpoint_fraction > 0.0
            && self.setpoint_fraction < self.clip_fraction
            && self.clip_fraction <= 1.0)
        {
            return Err(Error::invalid(
                "lock meta",
                "need 0 < setpoint_fraction < clip_fraction <= 1",
            ));
        }
        Ok(())
    }

    /// ΔL_FWHM = λ/(2F), pm.
    pub fn linewidth_pm(&self) -> f64 {
        self.wavelength_nm * 1e3 / (2.0 * self.finesse)
    }

    /// Detuning of the setpoint on the short-length flank, pm (negative).
    pub fn setpoint_detuning_pm(&self) -> f64 {
        -0.5 * self.linewidth_pm() * (1.0 / self.setpoint_fraction - 1.0).sqrt()
    }

    /// Transmission at length deviation `delta_pm` from the setpoint.
    pub fn transmission(&self, delta_pm: f64) -> f64 {
        let x = self.setpoint_detuning_pm() + delta_pm;
        self.peak_transmission / (1.0 + (2.0 * x / self.linewidth_pm()).powi(2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LockTrace {
    pub t_s: Vec<f64>,
    pub transmission: Vec<f64>,
    pub state: LockState,
    pub meta: LockMeta,
}

impl LockTrace {
    pub fn new(
        t_s: Vec<f64>,
        transmission: Vec<f64>,
        state: LockState,
        meta: LockMeta,
    ) -> Result<Self> {
        if t_s.len() != transmission.len() {
            return Err(Error::invalid(
                "lock trace",
                "t and transmission lengths differ",
            ));
        }
        uniform_step(&t_s, "lock trace time")?;
        meta.validate()?;
        Ok(Self {
            t_s,
            transmission,
            state,
            meta,
        })
    }

    pub fn sample_rate_hz(&self) -> f64 {
        1.0 / ((self.t_s[self.t_s.len() - 1] - self.t_s[0]) / (self.t_s.len() - 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthDeviation {
    /// Per-sample deviation, pm; NaN where clipped.
    pub delta_pm: Vec<f64>,
    pub clipped: Vec<bool>,
    pub clipped_count: usize,
    pub sigma_pm: f64,
    pub mean_pm: f64,
    pub linewidth_pm: f64,
}

impl LengthDeviation {
    /// Series with each clipped sample replaced by the previous valid value
    /// (or the next one at the start), for spectral analysis.
    pub fn filled(&self) -> Vec<f64> {
        let first = self
            .delta_pm
            .iter()
            .copied()
            .find(|v| v.is_finite())
            .unwrap_or(0.0);
        let mut last = first;
        self.delta_pm
            .iter()
            .map(|&v| {
                if v.is_finite() {
                    last = v;
                }
                last
            })
            .collect()
    }
}

/// Inverts the Lorentzian fringe around the setpoint. Samples at or above
/// the clip level, and non-positive ones, are flagged and left out of σ.
pub fn length_deviation(trace: &LockTrace) -> Result<LengthDeviation> {
    let m = &trace.meta;
    m.validate()?;
    let half_w = 0.5 * m.linewidth_pm();
    let x0 = m.setpoint_detuning_pm();
    let clip_level = m.clip_fraction * m.peak_transmission;
    let mut clipped = Vec::with_capacity(trace.transmission.len());
    let delta: Vec<f64> = trace
        .transmission
        .iter()
        .map(|&t| {
            let bad = !(t.is_finite() && t > 0.0 && t < clip_level);
            clipped.push(bad);
            if bad {
                f64::NAN
            } else {
                -half_w * (m.peak_transmission / t - 1.0).sqrt() - x0
            }
        })
        .collect();
    let valid: Vec<f64> = delta.iter().copied().filter(|v| v.is_finite()).collect();
    if valid.is_empty() {
        return Err(Error::DegenerateData("every sample is clipped".into()));
    }
    let mean = valid.iter().sum::<f64>() / valid.len() as f64;
    Ok(LengthDeviation {
        clipped_count: clipped.iter().filter(|c| **c).count(),
        delta_pm: delta,
        clipped,
        sigma_pm: rms_about_mean(&valid),
        mean_pm: mean,
        linewidth_pm: m.linewidth_pm(),
    })
}

/// 1 − σ_locked/σ_unlocked.
pub fn suppression(locked: &LengthDeviation, unlocked: &LengthDeviation) -> Result<f64> {
    if !(unlocked.sigma_pm > 0.0) {
        return Err(Error::DegenerateData(
            "unlocked trace has no fluctuation".into(),
        ));
    }
    Ok(1.0 - locked.sigma_pm / unlocked.sigma_pm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta() -> LockMeta {
        LockMeta::new(780.0, 200.0)
    }

    fn trace(delta: &[f64]) -> LockTrace {
        let m = meta();
        LockTrace::new(
            (0..delta.len()).map(|i| i as f64 * 1e-4).collect(),
            delta.iter().map(|&d| m.transmission(d)).collect(),
            LockState::Unlocked,
            m,
        )
        .unwrap()
    }

    #[test]
    fn setpoint_is_half_maximum() {
        let m = meta();
        assert!((m.transmission(0.0) - 0.5).abs() < 1e-15);
        assert!((m.linewidth_pm() - 1950.0).abs() < 1e-9);
    }

    #[test]
    fn constant_setpoint_gives_zero() {
        let d = length_deviation(&trace(&[0.0; 50])).unwrap();
        assert!(d.delta_pm.iter().all(|v| v.abs() < 1e-9));
        assert!(d.sigma_pm < 1e-9 && d.clipped_count == 0);
    }

    #[test]
    fn past_the_peak_is_clipped() {
        let d = length_deviation(&trace(&[0.0, 100.0, 975.0, 1020.0, -300.0])).unwrap();
        assert_eq!(d.clipped, vec![false, false, true, true, false]);
        assert_eq!(d.clipped_count, 2);
        assert!(d.delta_pm[2].is_nan());
        assert_eq!(d.filled()[2], d.delta_pm[1]);
    }

    #[test]
    fn suppression_of_known_pair() {
        let u = length_deviation(&trace(&[-290.0, 290.0])).unwrap();
        let l = length_deviation(&trace(&[-60.0, 60.0])).unwrap();
        assert!((suppression(&l, &u).unwrap() - (1.0 - 60.0 / 290.0)).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn inversion_is_identity_in_range(d in -5000.0..800.0f64) {
            let r = length_deviation(&trace(&[d, 0.0])).unwrap();
            prop_assert!((r.delta_pm[0] - d).abs() < 1e-6, "{} vs {}", r.delta_pm[0], d);
        }
    }
}
