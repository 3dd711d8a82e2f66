use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::response::{check_wavelength, left_edge_states};
use crate::error::{Error, Result};
use crate::optics::{LayerStack, Medium};

/// Counter-propagating plane waves inside one finite layer:
/// E(z) = a exp(i k z) + b exp(-i k z), z measured from the layer's left edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerWave {
    pub z_start_nm: f64,
    pub thickness_nm: f64,
    pub index: Complex64,
    pub forward: Complex64,
    pub backward: Complex64,
    k: Complex64,
}

/// Samples per layer used for absorbing layers, which have no closed form for
/// the peak intensity here.
const LOSSY_PEAK_SAMPLES: usize = 512;

impl LayerWave {
    pub fn field(&self, z_local_nm: f64) -> Complex64 {
        let phase = Complex64::i() * self.k * z_local_nm;
        self.forward * phase.exp() + self.backward * (-phase).exp()
    }

    pub fn intensity(&self, z_local_nm: f64) -> f64 {
        self.field(z_local_nm).norm_sqr()
    }

    fn lossless(&self) -> bool {
        self.k.im == 0.0
    }

    /// Integral of |E|^2 across the layer.
    pub fn intensity_integral(&self) -> f64 {
        let d = self.thickness_nm;
        let (kr, ki) = (self.k.re, self.k.im);
        let grow = |s: f64| if s == 0.0 { d } else { (s * d).exp_m1() / s };
        let fwd = self.forward.norm_sqr() * grow(-2.0 * ki);
        let bwd = self.backward.norm_sqr() * grow(2.0 * ki);
        let c = self.forward * self.backward.conj();
        let theta = 2.0 * kr * d;
        let half = (0.5 * theta).sin();
        let osc = Complex64::new(-2.0 * half * half, theta.sin()) / Complex64::new(0.0, 2.0 * kr);
        fwd + bwd + 2.0 * (c * osc).re
    }

    /// Phase of the standing-wave term, 2 k z + arg(a b*), at the left edge.
    fn beat_phase0(&self) -> f64 {
        (self.forward * self.backward.conj()).arg()
    }

    fn has_standing_wave(&self) -> bool {
        let c = (self.forward * self.backward.conj()).norm();
        c > 1e-12 * (self.forward.norm_sqr() + self.backward.norm_sqr())
    }

    /// Largest |E|^2 inside the layer (edges included).
    pub fn peak_intensity(&self) -> f64 {
        if !self.lossless() {
            return self.sampled_peak();
        }
        let edges = self.intensity(0.0).max(self.intensity(self.thickness_nm));
        match self.first_antinode_nm() {
            Some(z) => edges.max(self.intensity(z)),
            None => edges,
        }
    }

    /// Grid maximum refined by golden-section search on the neighbouring cells.
    fn sampled_peak(&self) -> f64 {
        let h = self.thickness_nm / LOSSY_PEAK_SAMPLES as f64;
        let (imax, best) = (0..=LOSSY_PEAK_SAMPLES)
            .map(|i| (i, self.intensity(h * i as f64)))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        let (mut a, mut b) = (
            (imax as f64 - 1.0).max(0.0) * h,
            ((imax + 1) as f64 * h).min(self.thickness_nm),
        );
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let (c, d) = (b - g * (b - a), a + g * (b - a));
            if self.intensity(c) > self.intensity(d) {
                b = d;
            } else {
                a = c;
            }
        }
        best.max(self.intensity(0.5 * (a + b)))
    }

    /// Depth of the first intensity maximum from the left edge, if the layer
    /// contains one. Lossless layers only.
    pub fn first_antinode_nm(&self) -> Option<f64> {
        if !self.lossless() || !self.has_standing_wave() {
            return None;
        }
        let theta0 = self.beat_phase0();
        let two_k = 2.0 * self.k.re;
        let m = (theta0 / (2.0 * PI)).ceil();
        let z = (2.0 * PI * m - theta0) / two_k;
        (z <= self.thickness_nm).then_some(z.max(0.0))
    }
}

/// Solved field for a whole stack at one wavelength, normalised to a unit
/// transmitted wave (or unit H at a perfect conductor).
#[derive(Debug, Clone)]
pub struct StackField {
    pub wavelength_nm: f64,
    pub waves: Vec<LayerWave>,
}

pub fn solve_field(stack: &LayerStack, wavelength_nm: f64) -> Result<StackField> {
    check_wavelength(wavelength_nm)?;
    if matches!(stack.entry, Medium::PerfectConductor) && stack.is_empty() {
        return Err(Error::invalid("stack", "no finite layers to solve"));
    }
    let states = left_edge_states(stack, wavelength_nm);
    let k0 = 2.0 * PI / wavelength_nm;
    let mut z = 0.0;
    let waves = stack
        .layers()
        .iter()
        .zip(&states)
        .map(|(layer, &(e, h))| {
            let n = layer.material.complex_index();
            let w = LayerWave {
                z_start_nm: z,
                thickness_nm: layer.thickness_nm(),
                index: n,
                forward: (e + h / n) * 0.5,
                backward: (e - h / n) * 0.5,
                k: n * k0,
            };
            z += layer.thickness_nm();
            w
        })
        .collect();
    Ok(StackField {
        wavelength_nm,
        waves,
    })
}

impl StackField {
    pub fn total_thickness_nm(&self) -> f64 {
        self.waves
            .last()
            .map_or(0.0, |w| w.z_start_nm + w.thickness_nm)
    }

    /// Index of the layer containing depth `z_nm`; boundaries belong to the
    /// layer on their right.
    pub fn layer_at(&self, z_nm: f64) -> Option<usize> {
        if z_nm < 0.0 || z_nm > self.total_thickness_nm() {
            return None;
        }
        let i = self.waves.partition_point(|w| w.z_start_nm <= z_nm);
        Some(i.saturating_sub(1))
    }

    pub fn field(&self, z_nm: f64) -> Option<Complex64> {
        self.layer_at(z_nm).map(|i| {
            let w = &self.waves[i];
            w.field(z_nm - w.z_start_nm)
        })
    }

    pub fn peak_intensity(&self) -> f64 {
        self.waves
            .iter()
            .map(LayerWave::peak_intensity)
            .fold(0.0, f64::max)
    }

    /// Sum over layers of n^2 times the integral of |E|^2.
    pub fn energy_integral(&self) -> f64 {
        self.waves
            .iter()
            .map(|w| w.index.re.powi(2) * w.intensity_integral())
            .sum()
    }
}

/// Extent and peak of one layer in a sampled profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerSpan {
    pub name: String,
    pub start_nm: f64,
    pub end_nm: f64,
    pub n: f64,
    pub peak_intensity: f64,
}

/// Sampled field and refractive index versus depth, scaled so the
/// stack-wide maximum of |E| is one. Layer edges appear once in each
/// adjoining layer, so `z_nm` is non-decreasing.
#[derive(Debug, Clone, Serialize)]
pub struct FieldProfile {
    pub wavelength_nm: f64,
    pub z_nm: Vec<f64>,
    #[serde(skip)]
    pub field: Vec<Complex64>,
    pub intensity: Vec<f64>,
    pub index: Vec<f64>,
    pub spans: Vec<LayerSpan>,
    #[serde(skip)]
    solved: StackField,
    #[serde(skip)]
    amplitude_scale: f64,
}

impl FieldProfile {
    /// Exact scaled field at depth `z_nm` (not interpolated).
    pub fn field_at(&self, z_nm: f64) -> Option<Complex64> {
        self.solved.field(z_nm).map(|e| e * self.amplitude_scale)
    }

    /// Exact scaled field at depth `z_local_nm` inside layer `layer`.
    pub fn field_in_layer(&self, layer: usize, z_local_nm: f64) -> Option<Complex64> {
        let w = self.solved.waves.get(layer)?;
        (0.0..=w.thickness_nm)
            .contains(&z_local_nm)
            .then(|| w.field(z_local_nm) * self.amplitude_scale)
    }

    /// Depth of the first |E|^2 maximum from the left edge of `layer`.
    pub fn first_antinode_in(&self, layer: usize) -> Option<f64> {
        self.solved.waves.get(layer)?.first_antinode_nm()
    }
}

pub fn field_profile(
    stack: &LayerStack,
    wavelength_nm: f64,
    samples_per_layer: usize,
) -> Result<FieldProfile> {
    if samples_per_layer < 2 {
        return Err(Error::invalid("samples_per_layer", "need at least 2"));
    }
    let field = solve_field(stack, wavelength_nm)?;
    let peak = field.peak_intensity();
    let scale = if peak > 0.0 { 1.0 / peak } else { 1.0 };
    let mut out = FieldProfile {
        wavelength_nm,
        z_nm: Vec::new(),
        field: Vec::new(),
        intensity: Vec::new(),
        index: Vec::new(),
        spans: Vec::new(),
        solved: field.clone(),
        amplitude_scale: scale.sqrt(),
    };
    for (w, layer) in field.waves.iter().zip(stack.layers()) {
        for i in 0..samples_per_layer {
            let zl = w.thickness_nm * i as f64 / (samples_per_layer - 1) as f64;
            let e = w.field(zl) * scale.sqrt();
            out.z_nm.push(w.z_start_nm + zl);
            out.field.push(e);
            out.intensity.push(e.norm_sqr());
            out.index.push(w.index.re);
        }
        out.spans.push(LayerSpan {
            name: layer.material.name.clone(),
            start_nm: w.z_start_nm,
            end_nm: w.z_start_nm + w.thickness_nm,
            n: w.index.re,
            peak_intensity: w.peak_intensity() * scale,
        });
    }
    Ok(out)
}
