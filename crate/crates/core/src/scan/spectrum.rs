//! One-sided amplitude spectral density with a Hann window.
//!
//! For a mean-free series x of N samples at rate fs and window w,
//! PSD_k = 2 |Σ w_n x_n e^{-2πikn/N}|² / (fs Σ w_n²), with the factor 2
//! dropped at DC and Nyquist. ASD = √PSD in input units per √Hz, so that
//! Σ PSD_k · fs/N approximates the variance of x.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use super::uniform_step;
use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 256;

/// Bins either side of a line summed for its amplitude; covers the Hann
/// main lobe for any offset from the bin grid.
const LINE_HALF_WIDTH: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseSpectrum {
    pub freq_hz: Vec<f64>,
    pub asd: Vec<f64>,
    pub resolution_hz: f64,
    pub sample_rate_hz: f64,
    /// Variance of the mean-free input series.
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralLine {
    pub freq_hz: f64,
    pub bin: usize,
    /// Sinusoid amplitude (not RMS) in input units.
    pub amplitude: f64,
}

pub fn noise_spectrum(series: &[f64], sample_rate_hz: f64) -> Result<NoiseSpectrum> {
    let n = series.len();
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{n} samples, need {MIN_SAMPLES}"
        )));
    }
    if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
        return Err(Error::invalid("sample_rate_hz", "must be > 0"));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series", "must be finite"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let variance = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let w: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect();
    let s2: f64 = w.iter().map(|v| v * v).sum();
    let mut buf: Vec<Complex64> = series
        .iter()
        .zip(&w)
        .map(|(x, w)| Complex64::new((x - mean) * w, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let (freq_hz, asd) = (0..=half)
        .map(|k| {
            let edge = k == 0 || (n % 2 == 0 && k == half);
            let p = buf[k].norm_sqr() * if edge { 1.0 } else { 2.0 } / (sample_rate_hz * s2);
            (k as f64 * sample_rate_hz / n as f64, p.sqrt())
        })
        .unzip();
    Ok(NoiseSpectrum {
        freq_hz,
        asd,
        resolution_hz: sample_rate_hz / n as f64,
        sample_rate_hz,
        variance,
    })
}

/// As [`noise_spectrum`], taking the rate from a time axis in seconds.
pub fn noise_spectrum_from_times(t_s: &[f64], series: &[f64]) -> Result<NoiseSpectrum> {
    if t_s.len() != series.len() {
        return Err(Error::invalid("series", "time and value lengths differ"));
    }
    let dt = uniform_step(t_s, "time axis")?;
    noise_spectrum(series, 1.0 / dt)
}

impl NoiseSpectrum {
    pub fn psd(&self, k: usize) -> f64 {
        self.asd[k] * self.asd[k]
    }

    /// Σ PSD · Δf.
    pub fn integrated_power(&self) -> f64 {
        (0..self.asd.len()).map(|k| self.psd(k)).sum::<f64>() * self.resolution_hz
    }

    /// Σ PSD · Δf over `lo..=hi` Hz.
    pub fn band_power(&self, lo_hz: f64, hi_hz: f64) -> f64 {
        self.freq_hz
            .iter()
            .enumerate()
            .filter(|(_, f)| (lo_hz..=hi_hz).contains(*f))
            .map(|(k, _)| self.psd(k))
            .sum::<f64>()
            * self.resolution_hz
    }

    fn line_at(&self, k: usize) -> SpectralLine {
        let lo = k.saturating_sub(LINE_HALF_WIDTH);
        let hi = (k + LINE_HALF_WIDTH).min(self.asd.len() - 1);
        let (mut p, mut fp) = (0.0, 0.0);
        for j in lo..=hi {
            p += self.psd(j);
            fp += self.psd(j) * self.freq_hz[j];
        }
        // Power in the lobe is A²/2.
        SpectralLine {
            freq_hz: fp / p,
            bin: k,
            amplitude: (2.0 * p * self.resolution_hz).sqrt(),
        }
    }

    /// Strongest bin within `lo..=hi` Hz, with the centroid frequency and
    /// amplitude of its main lobe.
    pub fn line_near(&self, lo_hz: f64, hi_hz: f64) -> Option<SpectralLine> {
        let k = (1..self.asd.len())
            .filter(|&k| (lo_hz..=hi_hz).contains(&self.freq_hz[k]))
            .max_by(|&a, &b| self.asd[a].total_cmp(&self.asd[b]))?;
        Some(self.line_at(k))
    }

    /// Local maxima whose PSD exceeds `factor` times the median PSD of the
    /// surrounding `window` bins, strongest first.
    pub fn lines(&self, factor: f64, window: usize) -> Vec<SpectralLine> {
        let n = self.asd.len();
        let half = window.max(2 * LINE_HALF_WIDTH + 1) / 2;
        let mut found: Vec<SpectralLine> = Vec::new();
        for k in 1..n.saturating_sub(1) {
            if !(self.asd[k] >= self.asd[k - 1] && self.asd[k] > self.asd[k + 1]) {
                continue;
            }
            let lo = k.saturating_sub(half).max(1);
            let hi = (k + half).min(n - 1);
            let mut local: Vec<f64> = (lo..=hi).map(|j| self.psd(j)).collect();
            let mid = local.len() / 2;
            let (_, med, _) = local.select_nth_unstable_by(mid, f64::total_cmp);
            if self.psd(k) > factor * *med {
                found.push(self.line_at(k));
            }
        }
        found.sort_by(|a, b| b.amplitude.total_cmp(&a.amplitude));
        let mut kept: Vec<SpectralLine> = Vec::new();
        for l in found {
            if kept
                .iter()
                .all(|k| k.bin.abs_diff(l.bin) > 2 * LINE_HALF_WIDTH)
            {
                kept.push(l);
            }
        }
        kept
    }
}

/// Frequency where the band-averaged ratio ASD_locked/ASD_unlocked climbs
/// to 1/√2 of its high-frequency level, scanning down from the top. Bands
/// are log spaced, 20 per decade; the high level is the median over the
/// top tenth of them.
pub fn suppression_band_edge(locked: &NoiseSpectrum, unlocked: &NoiseSpectrum) -> Result<f64> {
    if locked.freq_hz.len() != unlocked.freq_hz.len()
        || (locked.resolution_hz - unlocked.resolution_hz).abs() > 1e-9
    {
        return Err(Error::invalid(
            "spectra",
            "locked and unlocked grids differ",
        ));
    }
    // Log-spaced bands, 20 per decade.
    let f_lo = locked.resolution_hz;
    let f_hi = locked.freq_hz[locked.freq_hz.len() - 1];
    let nb = ((f_hi / f_lo).log10() * 20.0).ceil() as usize;
    let mut bands: Vec<(f64, f64)> = Vec::with_capacity(nb);
    for b in 0..nb {
        let a = f_lo * 10f64.powf(b as f64 / 20.0);
        let c = f_lo * 10f64.powf((b + 1) as f64 / 20.0);
        let (mut pl, mut pu, mut m) = (0.0, 0.0, 0);
        for (k, &f) in locked.freq_hz.iter().enumerate() {
            if f >= a && f < c && k > 0 {
                pl += locked.psd(k);
                pu += unlocked.psd(k);
                m += 1;
            }
        }
        if m > 0 && pu > 0.0 && pl > 0.0 {
            bands.push(((a * c).sqrt(), 0.5 * (pl / pu).ln()));
        }
    }
    if bands.len() < 10 {
        return Err(Error::InsufficientData("too few spectral bands".into()));
    }
    let tenth = (bands.len() / 10).max(1);
    let mut top: Vec<f64> = bands[bands.len() - tenth..].iter().map(|b| b.1).collect();
    top.sort_by(f64::total_cmp);
    let level = top[top.len() / 2] - std::f64::consts::LN_2 / 2.0;
    for w in bands.windows(2).rev() {
        if w[0].1 < level && w[1].1 >= level {
            let t = (level - w[0].1) / (w[1].1 - w[0].1);
            return Ok((w[0].0.ln() + t * (w[1].0.ln() - w[0].0.ln())).exp());
        }
    }
    Err(Error::DegenerateData(
        "no suppression band below the high-frequency level".into(),
    ))
}
