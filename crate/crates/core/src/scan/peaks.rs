use serde::Serialize;

use super::uniform_step;
use crate::error::{Error, Result};

/// Detector signal versus an equally spaced scan coordinate (cavity length
/// in nm, piezo voltage or time).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanTrace {
    pub x: Vec<f64>,
    pub transmission: Vec<f64>,
    pub reflection: Option<Vec<f64>>,
    /// Scan speed in x units per second, if known.
    pub scan_rate: Option<f64>,
}

impl ScanTrace {
    pub fn new(x: Vec<f64>, transmission: Vec<f64>) -> Result<Self> {
        if x.len() != transmission.len() {
            return Err(Error::invalid("scan", "x and transmission lengths differ"));
        }
        uniform_step(&x, "scan axis")?;
        if transmission.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("transmission", "must be finite"));
        }
        Ok(Self {
            x,
            transmission,
            reflection: None,
            scan_rate: None,
        })
    }

    pub fn step(&self) -> f64 {
        (self.x[self.x.len() - 1] - self.x[0]) / (self.x.len() - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPeak {
    /// Interpolated peak position in samples, and on the x axis.
    pub position_samples: f64,
    pub position: f64,
    pub height: f64,
    pub prominence: f64,
    /// Full width at half prominence, in samples and x units.
    pub fwhm_samples: f64,
    pub fwhm: f64,
}

/// Robust noise estimate from first differences.
fn noise_sigma(y: &[f64]) -> f64 {
    let mut d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    *m / (0.674_489_75 * std::f64::consts::SQRT_2)
}

/// Local maxima whose prominence exceeds `prominence` times the trace range
/// and twelve times the noise level. Sorted by position.
pub fn detect_scan_resonances(trace: &ScanTrace, prominence: f64) -> Result<Vec<ScanPeak>> {
    if !(0.0..=1.0).contains(&prominence) {
        return Err(Error::invalid(
            "prominence",
            format!("{prominence} must be in [0, 1]"),
        ));
    }
    let y = &trace.transmission;
    let n = y.len();
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let threshold = (prominence * (hi - lo)).max(12.0 * noise_sigma(y));
    if !(hi > lo) {
        return Ok(Vec::new());
    }
    let step = trace.step();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if !(y[i] > y[i - 1]) {
            i += 1;
            continue;
        }
        // Walk over a plateau.
        let mut j = i;
        while j + 1 < n && y[j + 1] == y[i] {
            j += 1;
        }
        if j + 1 >= n || y[j + 1] > y[i] {
            i = j + 1;
            continue;
        }
        let top = y[i];
        let mut left_min = top;
        let mut k = i;
        while k > 0 && y[k - 1] <= top {
            k -= 1;
            left_min = left_min.min(y[k]);
        }
        let mut right_min = top;
        let mut k = j;
        while k + 1 < n && y[k + 1] <= top {
            k += 1;
            right_min = right_min.min(y[k]);
        }
        let prom = top - left_min.max(right_min);
        if prom >= threshold && prom > 0.0 {
            let centre = (i + j) as f64 / 2.0;
            let pos = if i == j {
                centre + parabolic_offset(y[i - 1], y[i], y[i + 1])
            } else {
                centre
            };
            let half = top - prom / 2.0;
            let width = half_width_crossings(y, i, j, half);
            peaks.push(ScanPeak {
                position_samples: pos,
                position: trace.x[0] + pos * step,
                height: top,
                prominence: prom,
                fwhm_samples: width,
                fwhm: width * step,
            });
        }
        i = j + 1;
    }
    Ok(peaks)
}

fn parabolic_offset(a: f64, b: f64, c: f64) -> f64 {
    let den = a - 2.0 * b + c;
    if den.abs() > 0.0 {
        (0.5 * (a - c) / den).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

/// Distance between the interpolated crossings of `level` on each side.
fn half_width_crossings(y: &[f64], i: usize, j: usize, level: f64) -> f64 {
    let mut l = i;
    while l > 0 && y[l] > level {
        l -= 1;
    }
    let left = if y[l] <= level && l < i {
        l as f64 + (level - y[l]) / (y[l + 1] - y[l])
    } else {
        l as f64
    };
    let mut r = j;
    while r + 1 < y.len() && y[r] > level {
        r += 1;
    }
    let right = if y[r] <= level && r > j {
        r as f64 - (level - y[r]) / (y[r - 1] - y[r])
    } else {
        r as f64
    };
    right - left
}

/// Peaks at least `relative_height` of the tallest one.
pub fn fundamental_peaks(peaks: &[ScanPeak], relative_height: f64) -> Vec<ScanPeak> {
    let top = peaks.iter().map(|p| p.prominence).fold(0.0, f64::max);
    peaks
        .iter()
        .filter(|p| p.prominence >= relative_height * top)
        .copied()
        .collect()
}

/// Mean adjacent spacing over mean FWHM, from fundamental peaks one free
/// spectral range apart.
pub fn finesse_from_scan(peaks: &[ScanPeak]) -> Result<f64> {
    if peaks.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} peaks, need 2 adjacent fundamentals",
            peaks.len()
        )));
    }
    let mut pos: Vec<f64> = peaks.iter().map(|p| p.position).collect();
    pos.sort_by(f64::total_cmp);
    let spacing = (pos[pos.len() - 1] - pos[0]) / (pos.len() - 1) as f64;
    let fwhm = peaks.iter().map(|p| p.fwhm).sum::<f64>() / peaks.len() as f64;
    if !(fwhm > 0.0 && spacing > 0.0) {
        return Err(Error::DegenerateData("zero peak width or spacing".into()));
    }
    Ok(spacing / fwhm)
}
