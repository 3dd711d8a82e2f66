use serde::{Deserialize, Serialize};

use super::material::{Material, Medium};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub material: Material,
    thickness_nm: f64,
    /// RMS roughness of the surface facing the stack entry, nm.
    rough_top_nm: Option<f64>,
}

impl Layer {
    pub fn new(material: Material, thickness_nm: f64) -> Result<Self> {
        if !(thickness_nm.is_finite() && thickness_nm > 0.0) {
            return Err(Error::invalid(
                "thickness_nm",
                format!("{thickness_nm} for `{}` must be > 0", material.name),
            ));
        }
        Ok(Self {
            material,
            thickness_nm,
            rough_top_nm: None,
        })
    }

    pub fn with_roughness(mut self, sigma_rms_nm: f64) -> Result<Self> {
        if !(sigma_rms_nm.is_finite() && sigma_rms_nm >= 0.0) {
            return Err(Error::invalid(
                "sigma_rms_nm",
                format!("{sigma_rms_nm} must be >= 0"),
            ));
        }
        self.rough_top_nm = Some(sigma_rms_nm);
        Ok(self)
    }

    pub fn thickness_nm(&self) -> f64 {
        self.thickness_nm
    }

    pub fn rough_top_nm(&self) -> Option<f64> {
        self.rough_top_nm
    }

    pub fn optical_thickness_nm(&self) -> f64 {
        self.material.n() * self.thickness_nm
    }
}

/// Ordered layers between a semi-infinite entry and exit medium. Layer 0
/// touches the entry medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub entry: Medium,
    layers: Vec<Layer>,
    pub exit: Medium,
}

impl LayerStack {
    pub fn new(entry: impl Into<Medium>, layers: Vec<Layer>, exit: impl Into<Medium>) -> Self {
        Self {
            entry: entry.into(),
            layers,
            exit: exit.into(),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn total_thickness_nm(&self) -> f64 {
        self.layers.iter().map(Layer::thickness_nm).sum()
    }

    /// Same structure seen from the exit side.
    pub fn reversed(&self) -> Self {
        let mut layers = self.layers.clone();
        layers.reverse();
        Self {
            entry: self.exit.clone(),
            layers,
            exit: self.entry.clone(),
        }
    }

    /// Left edge (depth from the entry interface) of every layer.
    pub fn boundaries_nm(&self) -> Vec<f64> {
        let mut z = 0.0;
        self.layers
            .iter()
            .map(|l| {
                let start = z;
                z += l.thickness_nm();
                start
            })
            .collect()
    }
}

/// Alternating quarter-wave stack on `substrate`: `pairs` repetitions of
/// (low, high), so the last layer (high index) faces `cap`.
pub fn build_quarter_wave_stack(
    center_wavelength_nm: f64,
    n_high: f64,
    n_low: f64,
    pairs: usize,
    substrate: Material,
    cap: Material,
) -> Result<LayerStack> {
    if pairs == 0 {
        return Err(Error::invalid("pairs", "need at least one pair"));
    }
    if !(center_wavelength_nm.is_finite() && center_wavelength_nm > 0.0) {
        return Err(Error::invalid("center_wavelength_nm", "must be > 0"));
    }
    let high = Material::new("high", n_high)?;
    let low = Material::new("low", n_low)?;
    let quarter = |m: &Material| Layer::new(m.clone(), center_wavelength_nm / (4.0 * m.n()));
    let mut layers = Vec::with_capacity(2 * pairs);
    for _ in 0..pairs {
        layers.push(quarter(&low)?);
        layers.push(quarter(&high)?);
    }
    Ok(LayerStack::new(substrate, layers, cap))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair_has_quarter_wave_layers() {
        let s = build_quarter_wave_stack(736.0, 2.10, 1.46, 1, Material::silica(), Material::air())
            .unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.layers()[0].thickness_nm(), 736.0 / (4.0 * 1.46));
        assert_eq!(s.layers()[1].thickness_nm(), 736.0 / (4.0 * 2.10));
        assert_eq!(s.layers()[1].material.n(), 2.10);
    }

    #[test]
    fn zero_pairs_rejected() {
        assert!(
            build_quarter_wave_stack(736.0, 2.1, 1.46, 0, Material::silica(), Material::air())
                .is_err()
        );
    }

    #[test]
    fn sub_unity_index_rejected() {
        let e = build_quarter_wave_stack(736.0, 0.9, 1.46, 3, Material::silica(), Material::air());
        assert!(matches!(e, Err(Error::NonPhysicalIndex { .. })));
        assert!(Material::new("x", 0.5).is_err());
        assert!(Material::with_extinction("x", 1.5, -0.1).is_err());
    }

    #[test]
    fn layers_need_positive_thickness() {
        assert!(Layer::new(Material::air(), 0.0).is_err());
        assert!(Layer::new(Material::air(), -3.0).is_err());
        assert!(Layer::new(Material::air(), 1.0)
            .unwrap()
            .with_roughness(-1.0)
            .is_err());
    }

    #[test]
    fn builder_is_deterministic() {
        let a = build_quarter_wave_stack(736.0, 2.1, 1.46, 7, Material::silica(), Material::air());
        let b = build_quarter_wave_stack(736.0, 2.1, 1.46, 7, Material::silica(), Material::air());
        assert_eq!(a.unwrap(), b.unwrap());
    }
}
