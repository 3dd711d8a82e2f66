use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::material::{Material, Medium};
use super::stack::{build_quarter_wave_stack, Layer, LayerStack};
use crate::constants::{
    COATING_WAVELENGTH_NM, FIBER_RADIUS_OF_CURVATURE_UM, FIXTURE_HIGH_INDEX, FIXTURE_MIRROR_PAIRS,
    IMPLANT_DEPTH_NM, MEMBRANE_ROUGHNESS_NM, MEMBRANE_THICKNESS_NM, PARASITIC_GAP_NM, SIO2_INDEX,
};
use crate::error::{Error, Result};

/// Coated mirror: a substrate plus coating layers ordered from the substrate
/// towards the cavity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mirror {
    pub substrate: Medium,
    pub layers: Vec<Layer>,
}

impl Mirror {
    pub fn new(substrate: impl Into<Medium>, layers: Vec<Layer>) -> Self {
        Self {
            substrate: substrate.into(),
            layers,
        }
    }

    /// (low, high) quarter-wave pairs on silica, high index facing the cavity.
    pub fn quarter_wave(
        center_wavelength_nm: f64,
        n_high: f64,
        n_low: f64,
        pairs: usize,
    ) -> Result<Self> {
        let stack = build_quarter_wave_stack(
            center_wavelength_nm,
            n_high,
            n_low,
            pairs,
            Material::silica(),
            Material::air(),
        )?;
        Ok(Self::new(stack.entry.clone(), stack.layers().to_vec()))
    }

    /// Ta2O5/SiO2 coating tuned to the quoted 1480 ppm at 736 nm.
    pub fn fixture() -> Self {
        Self::quarter_wave(
            COATING_WAVELENGTH_NM,
            FIXTURE_HIGH_INDEX,
            SIO2_INDEX,
            FIXTURE_MIRROR_PAIRS,
        )
        .expect("fixture coating parameters are valid")
    }

    /// Ideal hard mirror with no penetration.
    pub fn perfect() -> Self {
        Self::new(Medium::PerfectConductor, Vec::new())
    }

    pub fn thickness_nm(&self) -> f64 {
        self.layers.iter().map(Layer::thickness_nm).sum()
    }

    /// The coating as a stack seen from an air gap: entry air, exit substrate.
    pub fn as_reflector(&self) -> LayerStack {
        let mut layers = self.layers.clone();
        layers.reverse();
        LayerStack::new(Material::air(), layers, self.substrate.clone())
    }
}

/// Fiber mirror | air gap | diamond membrane | parasitic air gap | plane mirror.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavityAssembly {
    pub fiber_mirror: Mirror,
    gap_nm: f64,
    membrane: Option<Layer>,
    gap2_nm: f64,
    pub plane_mirror: Mirror,
    r_c_um: f64,
    implant_depth_nm: f64,
}

/// Where each segment of a flattened assembly sits in the layer list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssemblyLayout {
    pub fiber_mirror: Range<usize>,
    pub fiber_gap: Option<usize>,
    pub membrane: Option<usize>,
    pub gap2: Option<usize>,
    pub plane_mirror: Range<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentThicknesses {
    pub gap_nm: f64,
    pub membrane_nm: Option<f64>,
    pub gap2_nm: f64,
}

impl CavityAssembly {
    pub fn new(
        fiber_mirror: Mirror,
        gap_nm: f64,
        membrane: Option<Layer>,
        gap2_nm: f64,
        plane_mirror: Mirror,
        r_c_um: f64,
        implant_depth_nm: f64,
    ) -> Result<Self> {
        let a = Self {
            fiber_mirror,
            gap_nm,
            membrane,
            gap2_nm,
            plane_mirror,
            r_c_um,
            implant_depth_nm,
        };
        a.validate()?;
        Ok(a)
    }

    /// Empty cavity between two mirrors.
    pub fn empty(
        fiber_mirror: Mirror,
        gap_nm: f64,
        plane_mirror: Mirror,
        r_c_um: f64,
    ) -> Result<Self> {
        Self::new(fiber_mirror, gap_nm, None, 0.0, plane_mirror, r_c_um, 0.0)
    }

    /// The measured device: fixture coatings, 1.42 um diamond with 3.6 nm
    /// roughness on the fiber side, 250 nm parasitic gap, r_c = 45 um.
    pub fn reference(gap_nm: f64) -> Result<Self> {
        let membrane = Layer::new(Material::diamond(), MEMBRANE_THICKNESS_NM)?
            .with_roughness(MEMBRANE_ROUGHNESS_NM)?;
        Self::new(
            Mirror::fixture(),
            gap_nm,
            Some(membrane),
            PARASITIC_GAP_NM,
            Mirror::fixture(),
            FIBER_RADIUS_OF_CURVATURE_UM,
            IMPLANT_DEPTH_NM,
        )
    }

    fn validate(&self) -> Result<()> {
        if !(self.gap_nm.is_finite() && self.gap_nm >= 0.0) {
            return Err(Error::invalid(
                "gap_nm",
                format!("{} must be >= 0", self.gap_nm),
            ));
        }
        if !(self.gap2_nm.is_finite() && self.gap2_nm >= 0.0) {
            return Err(Error::invalid(
                "gap2_nm",
                format!("{} must be >= 0", self.gap2_nm),
            ));
        }
        if !(self.r_c_um.is_finite() && self.r_c_um > 0.0) {
            return Err(Error::invalid(
                "r_c_um",
                format!("{} must be > 0", self.r_c_um),
            ));
        }
        let t_d = self.membrane.as_ref().map_or(0.0, Layer::thickness_nm);
        if !(self.implant_depth_nm >= 0.0 && self.implant_depth_nm <= t_d) {
            return Err(Error::invalid(
                "implant_depth_nm",
                format!(
                    "{} must lie within the membrane [0, {t_d}]",
                    self.implant_depth_nm
                ),
            ));
        }
        Ok(())
    }

    pub fn gap_nm(&self) -> f64 {
        self.gap_nm
    }

    pub fn gap2_nm(&self) -> f64 {
        self.gap2_nm
    }

    pub fn membrane(&self) -> Option<&Layer> {
        self.membrane.as_ref()
    }

    pub fn membrane_thickness_nm(&self) -> f64 {
        self.membrane.as_ref().map_or(0.0, Layer::thickness_nm)
    }

    pub fn r_c_um(&self) -> f64 {
        self.r_c_um
    }

    pub fn implant_depth_nm(&self) -> f64 {
        self.implant_depth_nm
    }

    /// Index of the layer hosting emitters: the membrane, or air for an empty cavity.
    pub fn host_index(&self) -> f64 {
        self.membrane.as_ref().map_or(1.0, |m| m.material.n())
    }

    pub fn with_gap(&self, gap_nm: f64) -> Result<Self> {
        let mut a = self.clone();
        a.gap_nm = gap_nm;
        a.validate()?;
        Ok(a)
    }

    pub fn with_gap2(&self, gap2_nm: f64) -> Result<Self> {
        let mut a = self.clone();
        a.gap2_nm = gap2_nm;
        a.validate()?;
        Ok(a)
    }

    /// Replace the membrane thickness, keeping its material and roughness.
    /// The implant depth is clamped into the new membrane.
    pub fn with_membrane_thickness(&self, thickness_nm: f64) -> Result<Self> {
        let mut a = self.clone();
        let old = a
            .membrane
            .as_ref()
            .ok_or_else(|| Error::invalid("membrane", "assembly has no membrane"))?;
        let mut layer = Layer::new(old.material.clone(), thickness_nm)?;
        if let Some(s) = old.rough_top_nm() {
            layer = layer.with_roughness(s)?;
        }
        a.membrane = Some(layer);
        a.implant_depth_nm = a.implant_depth_nm.min(thickness_nm);
        a.validate()?;
        Ok(a)
    }

    pub fn without_membrane(&self) -> Self {
        let mut a = self.clone();
        a.membrane = None;
        a.implant_depth_nm = 0.0;
        a
    }

    pub fn with_implant_depth(&self, depth_nm: f64) -> Result<Self> {
        let mut a = self.clone();
        a.implant_depth_nm = depth_nm;
        a.validate()?;
        Ok(a)
    }

    pub fn layout(&self) -> AssemblyLayout {
        let nf = self.fiber_mirror.layers.len();
        let mut idx = nf;
        let mut take = |present: bool| {
            present.then(|| {
                idx += 1;
                idx - 1
            })
        };
        let fiber_gap = take(self.gap_nm > 0.0);
        let membrane = take(self.membrane.is_some());
        let gap2 = take(self.gap2_nm > 0.0);
        let np = self.plane_mirror.layers.len();
        AssemblyLayout {
            fiber_mirror: 0..nf,
            fiber_gap,
            membrane,
            gap2,
            plane_mirror: idx..idx + np,
        }
    }

    /// Single stack from fiber substrate to plane-mirror substrate.
    pub fn flatten(&self) -> LayerStack {
        let mut layers = self.fiber_mirror.layers.clone();
        layers.extend(self.cavity_layers());
        layers.extend(self.plane_mirror.layers.iter().rev().cloned());
        LayerStack::new(
            self.fiber_mirror.substrate.clone(),
            layers,
            self.plane_mirror.substrate.clone(),
        )
    }

    fn cavity_layers(&self) -> Vec<Layer> {
        let air = |t: f64| Layer::new(Material::air(), t).expect("positive gap");
        let mut v = Vec::new();
        if self.gap_nm > 0.0 {
            v.push(air(self.gap_nm));
        }
        v.extend(self.membrane.clone());
        if self.gap2_nm > 0.0 {
            v.push(air(self.gap2_nm));
        }
        v
    }

    /// Fiber mirror seen from the air gap.
    pub fn left_reflector(&self) -> LayerStack {
        self.fiber_mirror.as_reflector()
    }

    /// Everything to the right of the fiber gap, seen from the air gap.
    pub fn right_reflector(&self) -> LayerStack {
        let mut layers: Vec<Layer> = self.membrane.iter().cloned().collect();
        if self.gap2_nm > 0.0 {
            layers.push(Layer::new(Material::air(), self.gap2_nm).expect("positive gap"));
        }
        layers.extend(self.plane_mirror.layers.iter().rev().cloned());
        LayerStack::new(Material::air(), layers, self.plane_mirror.substrate.clone())
    }

    /// Reduced distance between the mirror surfaces for Gaussian-beam
    /// propagation: the membrane counts as t_d / n_d.
    pub fn beam_length_nm(&self) -> f64 {
        let membrane = self
            .membrane
            .as_ref()
            .map_or(0.0, |m| m.thickness_nm() / m.material.n());
        self.gap_nm + membrane + self.gap2_nm
    }

    /// Geometric distance between the two coating surfaces.
    pub fn mirror_separation_nm(&self) -> f64 {
        self.gap_nm + self.membrane_thickness_nm() + self.gap2_nm
    }
}

impl AssemblyLayout {
    pub fn read_segments(&self, stack: &LayerStack) -> SegmentThicknesses {
        let t = |i: Option<usize>| i.map(|i| stack.layers()[i].thickness_nm());
        SegmentThicknesses {
            gap_nm: t(self.fiber_gap).unwrap_or(0.0),
            membrane_nm: t(self.membrane),
            gap2_nm: t(self.gap2).unwrap_or(0.0),
        }
    }

    /// Layer that normalises energy-weighted quantities: the membrane if
    /// present, otherwise the fiber gap.
    pub fn emitter_layer(&self) -> Option<usize> {
        self.membrane.or(self.fiber_gap)
    }
}

impl Default for CavityAssembly {
    fn default() -> Self {
        Self::reference(10_000.0).expect("reference geometry is valid")
    }
}
