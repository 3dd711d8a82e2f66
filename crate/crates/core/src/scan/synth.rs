//! Seeded length-scan and lock-trace generators.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::lock::{LockMeta, LockState, LockTrace};
use super::peaks::ScanTrace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSynth {
    pub wavelength_nm: f64,
    pub finesse: f64,
    pub fundamentals: usize,
    pub samples_per_fwhm: f64,
    pub start_length_nm: f64,
    /// Transverse modes repeated every free spectral range: (offset in
    /// FSR, height relative to the fundamental).
    pub higher_order: Vec<(f64, f64)>,
    pub noise: f64,
}

impl Default for ScanSynth {
    fn default() -> Self {
        Self {
            wavelength_nm: 736.0,
            finesse: 2200.0,
            fundamentals: 9,
            samples_per_fwhm: 10.0,
            start_length_nm: 15_000.0,
            higher_order: vec![(0.23, 0.3), (0.46, 0.15)],
            noise: 0.002,
        }
    }
}

/// Airy transmission versus cavity length. Fundamentals sit half a free
/// spectral range from each end of the scan.
pub fn synthesize_scan<R: Rng + ?Sized>(cfg: &ScanSynth, rng: &mut R) -> Result<ScanTrace> {
    if !(cfg.wavelength_nm > 0.0
        && cfg.finesse > 1.0
        && cfg.samples_per_fwhm >= 2.0
        && cfg.noise >= 0.0)
    {
        return Err(Error::invalid(
            "scan synth",
            "need λ > 0, F > 1, >= 2 samples per FWHM, noise >= 0",
        ));
    }
    if cfg.fundamentals == 0 {
        return Err(Error::invalid("fundamentals", "need at least one"));
    }
    let fsr = cfg.wavelength_nm / 2.0;
    let per_fsr = (cfg.finesse * cfg.samples_per_fwhm).ceil() as usize;
    let n = per_fsr * cfg.fundamentals;
    let dx = fsr / per_fsr as f64;
    let coeff = (2.0 * cfg.finesse / PI).powi(2);
    let airy = |l: f64| 1.0 / (1.0 + coeff * (PI * l / fsr).sin().powi(2));
    let noise = Normal::new(0.0, cfg.noise.max(f64::MIN_POSITIVE)).expect("positive sigma");
    let x: Vec<f64> = (0..n)
        .map(|i| cfg.start_length_nm + i as f64 * dx)
        .collect();
    let y = x
        .iter()
        .map(|&l| {
            let rel = l - cfg.start_length_nm - 0.5 * fsr;
            let mut t = airy(rel);
            for &(off, h) in &cfg.higher_order {
                t += h * airy(rel - off * fsr);
            }
            t + if cfg.noise > 0.0 {
                noise.sample(rng)
            } else {
                0.0
            }
        })
        .collect();
    ScanTrace::new(x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub freq_hz: f64,
    /// Sinusoid amplitude, pm.
    pub amplitude_pm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LockSynth {
    pub sigma_unlocked_pm: f64,
    pub sigma_locked_pm: f64,
    /// Corner of the unlocked broadband spectrum, PSD ∝ 1/(1 + (f/f_n)⁴).
    pub noise_corner_hz: f64,
    /// Above this the lock stops suppressing (second-order high-pass edge).
    pub lock_bandwidth_hz: f64,
    pub lines: Vec<LineSpec>,
    pub sample_rate_hz: f64,
    pub samples: usize,
    pub meta: LockMeta,
    /// Gaussian detector noise on the transmission, detector units.
    pub detector_noise: f64,
}

impl Default for LockSynth {
    fn default() -> Self {
        Self {
            sigma_unlocked_pm: 290.0,
            sigma_locked_pm: 60.0,
            noise_corner_hz: 150.0,
            lock_bandwidth_hz: 800.0,
            lines: vec![
                LineSpec {
                    freq_hz: 20.0,
                    amplitude_pm: 100.0,
                },
                LineSpec {
                    freq_hz: 293.0,
                    amplitude_pm: 80.0,
                },
            ],
            sample_rate_hz: 20_000.0,
            samples: 1 << 19,
            meta: LockMeta::new(780.0, 150.0),
            detector_noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LockPair {
    pub locked: LockTrace,
    pub unlocked: LockTrace,
    /// Length deviations the traces were generated from, pm.
    pub delta_locked_pm: Vec<f64>,
    pub delta_unlocked_pm: Vec<f64>,
}

/// Fraction of broadband and line power the lock passes at `f`:
/// s² + (1 − s²)·hp² with a second-order high-pass hp at the lock bandwidth.
fn lock_gain_sq(f: f64, fc: f64, s_sq: f64) -> f64 {
    let r4 = (f / fc).powi(4);
    let hp = r4 / (1.0 + r4);
    s_sq + (1.0 - s_sq) * hp
}

/// Unlocked and locked length noise sharing one set of random phases, so the
/// ratio of their spectra is the lock transfer function. The in-band
/// suppression is solved so both RMS values come out as requested.
pub fn synthesize_lock_traces<R: Rng + ?Sized>(cfg: &LockSynth, rng: &mut R) -> Result<LockPair> {
    cfg.meta.validate()?;
    if !(cfg.sample_rate_hz > 0.0 && cfg.noise_corner_hz > 0.0 && cfg.lock_bandwidth_hz > 0.0) {
        return Err(Error::invalid(
            "lock synth",
            "rates and corner frequencies must be > 0",
        ));
    }
    if cfg.samples < 16 {
        return Err(Error::invalid("samples", "need at least 16"));
    }
    if !(cfg.sigma_unlocked_pm >= 0.0 && cfg.sigma_locked_pm >= 0.0 && cfg.detector_noise >= 0.0) {
        return Err(Error::invalid("lock synth", "sigmas must be >= 0"));
    }
    let n = cfg.samples;
    let fs = cfg.sample_rate_hz;
    let fc = cfg.lock_bandwidth_hz;
    let line_var: f64 = cfg.lines.iter().map(|l| 0.5 * l.amplitude_pm.powi(2)).sum();
    let broad_var = cfg.sigma_unlocked_pm.powi(2) - line_var;
    if broad_var < 0.0 {
        return Err(Error::invalid(
            "lines",
            "line power exceeds the requested unlocked variance",
        ));
    }
    if cfg
        .lines
        .iter()
        .any(|l| !(l.freq_hz > 0.0 && l.freq_hz < fs / 2.0))
    {
        return Err(Error::invalid("lines", "frequencies must lie in (0, fs/2)"));
    }

    // Broadband bins 1..n/2 excluding Nyquist; each carries variance 2a².
    let bins: Vec<usize> = (1..(n + 1) / 2).collect();
    let shape: Vec<f64> = bins
        .iter()
        .map(|&k| 1.0 / (1.0 + (k as f64 * fs / n as f64 / cfg.noise_corner_hz).powi(4)))
        .collect();
    let shape_sum: f64 = shape.iter().sum();
    let a_sq: Vec<f64> = shape
        .iter()
        .map(|s| broad_var * s / (2.0 * shape_sum))
        .collect();
    let phases: Vec<f64> = bins
        .iter()
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect();
    let line_phases: Vec<f64> = cfg
        .lines
        .iter()
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect();

    // Locked variance = s²·B + A, linear in s².
    let (mut pass, mut block) = (0.0, 0.0);
    for (i, &k) in bins.iter().enumerate() {
        let f = k as f64 * fs / n as f64;
        pass += 2.0 * a_sq[i] * lock_gain_sq(f, fc, 0.0);
        block += 2.0 * a_sq[i] * (1.0 - lock_gain_sq(f, fc, 0.0));
    }
    for l in &cfg.lines {
        let v = 0.5 * l.amplitude_pm.powi(2);
        pass += v * lock_gain_sq(l.freq_hz, fc, 0.0);
        block += v * (1.0 - lock_gain_sq(l.freq_hz, fc, 0.0));
    }
    let target = cfg.sigma_locked_pm.powi(2);
    let s_sq = if block > 0.0 {
        (target - pass) / block
    } else {
        0.0
    };
    if cfg.sigma_unlocked_pm > 0.0 && !(0.0..=1.0).contains(&s_sq) {
        return Err(Error::invalid(
            "sigma_locked_pm",
            format!(
                "not reachable with this spectrum (passband alone gives {:.1} pm)",
                pass.sqrt()
            ),
        ));
    }

    let series = |gain: &dyn Fn(f64) -> f64| -> Vec<f64> {
        let mut spec = vec![Complex64::new(0.0, 0.0); n];
        for (i, &k) in bins.iter().enumerate() {
            let f = k as f64 * fs / n as f64;
            let c = Complex64::from_polar((a_sq[i] * gain(f)).sqrt(), phases[i]);
            spec[k] = c;
            spec[n - k] = c.conj();
        }
        FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
        (0..n)
            .map(|j| {
                let t = j as f64 / fs;
                let lines: f64 = cfg
                    .lines
                    .iter()
                    .zip(&line_phases)
                    .map(|(l, p)| {
                        gain(l.freq_hz).sqrt()
                            * l.amplitude_pm
                            * (2.0 * PI * l.freq_hz * t + p).cos()
                    })
                    .sum();
                spec[j].re + lines
            })
            .collect()
    };
    let unlocked = series(&|_| 1.0);
    let locked = series(&|f| lock_gain_sq(f, fc, s_sq.clamp(0.0, 1.0)));

    let det = Normal::new(0.0, cfg.detector_noise.max(f64::MIN_POSITIVE)).expect("positive sigma");
    let t_s: Vec<f64> = (0..n).map(|j| j as f64 / fs).collect();
    let mut to_trace = |delta: &[f64], state| {
        let tr = delta
            .iter()
            .map(|&d| {
                cfg.meta.transmission(d)
                    + if cfg.detector_noise > 0.0 {
                        det.sample(rng)
                    } else {
                        0.0
                    }
            })
            .collect();
        LockTrace::new(t_s.clone(), tr, state, cfg.meta)
    };
    Ok(LockPair {
        unlocked: to_trace(&unlocked, LockState::Unlocked)?,
        locked: to_trace(&locked, LockState::Locked)?,
        delta_locked_pm: locked,
        delta_unlocked_pm: unlocked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::{
        detect_scan_resonances, finesse_from_scan, fundamental_peaks, rms_about_mean,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scan_round_trip_finesse() {
        for f in [2200.0, 1000.0] {
            let cfg = ScanSynth {
                finesse: f,
                ..Default::default()
            };
            let t = synthesize_scan(&cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
            let all = detect_scan_resonances(&t, 0.05).unwrap();
            let fund = fundamental_peaks(&all, 0.6);
            assert_eq!(fund.len(), 9);
            assert!(all.len() > 9);
            let got = finesse_from_scan(&fund).unwrap();
            assert!((got / f - 1.0).abs() < 0.05, "{got}");
        }
    }

    #[test]
    fn lock_pair_statistics() {
        let cfg = LockSynth::default();
        let p = synthesize_lock_traces(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let su = rms_about_mean(&p.delta_unlocked_pm);
        let sl = rms_about_mean(&p.delta_locked_pm);
        assert!((su / 290.0 - 1.0).abs() < 0.05, "{su}");
        assert!((sl / 60.0 - 1.0).abs() < 0.05, "{sl}");
        let again = synthesize_lock_traces(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn zero_request_is_flat() {
        let cfg = LockSynth {
            sigma_unlocked_pm: 0.0,
            sigma_locked_pm: 0.0,
            lines: vec![],
            samples: 1024,
            ..Default::default()
        };
        let p = synthesize_lock_traces(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(p
            .delta_unlocked_pm
            .iter()
            .chain(&p.delta_locked_pm)
            .all(|v| v.abs() < 1e-12));
        assert!(p
            .unlocked
            .transmission
            .iter()
            .all(|t| (t - 0.5).abs() < 1e-12));
    }

    #[test]
    fn unreachable_locked_sigma_is_rejected() {
        let cfg = LockSynth {
            sigma_locked_pm: 295.0,
            ..Default::default()
        };
        assert!(synthesize_lock_traces(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
        let cfg = LockSynth {
            sigma_unlocked_pm: 50.0,
            ..Default::default()
        };
        assert!(synthesize_lock_traces(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }
}
