//! Length-scan peaks and finesse, side-of-fringe length deviation, lock
//! suppression and noise spectra.

pub mod lock;
pub mod peaks;
pub mod spectrum;
pub mod synth;

pub use lock::{length_deviation, suppression, LengthDeviation, LockMeta, LockState, LockTrace};
pub use peaks::{
    detect_scan_resonances, finesse_from_scan, fundamental_peaks, ScanPeak, ScanTrace,
};
pub use spectrum::{
    noise_spectrum, noise_spectrum_from_times, suppression_band_edge, NoiseSpectrum, SpectralLine,
};
pub use synth::{
    synthesize_lock_traces, synthesize_scan, LineSpec, LockPair, LockSynth, ScanSynth,
};

use crate::error::{Error, Result};

/// Step of an equally spaced, increasing axis.
pub(crate) fn uniform_step(x: &[f64], what: &str) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{what}: {} samples",
            x.len()
        )));
    }
    let step = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    if !(step > 0.0 && step.is_finite())
        || x.windows(2)
            .any(|w| ((w[1] - w[0]) - step).abs() > 1e-6 * step)
    {
        return Err(Error::NonUniformSampling(format!(
            "{what} must be equally spaced and increasing"
        )));
    }
    Ok(step)
}

pub(crate) fn rms_about_mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let m = x.iter().sum::<f64>() / x.len() as f64;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}
