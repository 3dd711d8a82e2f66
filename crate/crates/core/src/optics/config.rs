//! JSON description of a cavity assembly.
//!
//! ```json
//! {
//!   "fiber_mirror": { "kind": "fixture" },
//!   "gap_nm": 9000.0,
//!   "membrane": { "thickness_nm": 1420.0, "n": 2.417, "sigma_rms_nm": 3.6 },
//!   "gap2_nm": 250.0,
//!   "plane_mirror": { "kind": "quarter_wave", "center_wavelength_nm": 736.0,
//!                     "n_high": 2.05561, "n_low": 1.46, "pairs": 11 },
//!   "r_c_um": 45.0,
//!   "implant_depth_nm": 75.0
//! }
//! ```
//!
//! Mirror kinds: `fixture`, `perfect`, `quarter_wave` (optional
//! `substrate_index`, default silica) and `layers` (explicit `substrate` plus
//! `layers` listed from the substrate towards the cavity).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::assembly::{CavityAssembly, Mirror};
use super::material::Material;
use super::stack::{build_quarter_wave_stack, Layer};
use crate::constants::{
    DIAMOND_INDEX, FIBER_RADIUS_OF_CURVATURE_UM, IMPLANT_DEPTH_NM, MEMBRANE_ROUGHNESS_NM,
    MEMBRANE_THICKNESS_NM, PARASITIC_GAP_NM, SILICA_INDEX,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub n: f64,
    #[serde(default)]
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub n: f64,
    #[serde(default)]
    pub kappa: f64,
    pub thickness_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MirrorConfig {
    Fixture,
    Perfect,
    QuarterWave {
        center_wavelength_nm: f64,
        n_high: f64,
        n_low: f64,
        pairs: usize,
        #[serde(default = "default_substrate_index")]
        substrate_index: f64,
    },
    Layers {
        substrate: MaterialConfig,
        layers: Vec<LayerConfig>,
    },
}

fn default_substrate_index() -> f64 {
    SILICA_INDEX
}

fn default_diamond_index() -> f64 {
    DIAMOND_INDEX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembraneConfig {
    pub thickness_nm: f64,
    #[serde(default = "default_diamond_index")]
    pub n: f64,
    #[serde(default)]
    pub sigma_rms_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssemblyConfig {
    pub fiber_mirror: MirrorConfig,
    pub gap_nm: f64,
    #[serde(default)]
    pub membrane: Option<MembraneConfig>,
    #[serde(default)]
    pub gap2_nm: f64,
    pub plane_mirror: MirrorConfig,
    pub r_c_um: f64,
    #[serde(default)]
    pub implant_depth_nm: f64,
}

impl MirrorConfig {
    pub fn build(&self) -> Result<Mirror> {
        match self {
            MirrorConfig::Fixture => Ok(Mirror::fixture()),
            MirrorConfig::Perfect => Ok(Mirror::perfect()),
            MirrorConfig::QuarterWave {
                center_wavelength_nm,
                n_high,
                n_low,
                pairs,
                substrate_index,
            } => {
                let stack = build_quarter_wave_stack(
                    *center_wavelength_nm,
                    *n_high,
                    *n_low,
                    *pairs,
                    Material::new("silica", *substrate_index)?,
                    Material::air(),
                )?;
                Ok(Mirror::new(stack.entry.clone(), stack.layers().to_vec()))
            }
            MirrorConfig::Layers { substrate, layers } => {
                let sub = Material::with_extinction(
                    substrate.name.clone().unwrap_or_else(|| "substrate".into()),
                    substrate.n,
                    substrate.kappa,
                )?;
                let layers = layers
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        let m = Material::with_extinction(
                            l.name.clone().unwrap_or_else(|| format!("layer{i}")),
                            l.n,
                            l.kappa,
                        )?;
                        Layer::new(m, l.thickness_nm)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Mirror::new(sub, layers))
            }
        }
    }
}

impl AssemblyConfig {
    /// The measured device at the given fiber gap.
    pub fn reference(gap_nm: f64) -> Self {
        Self {
            fiber_mirror: MirrorConfig::Fixture,
            gap_nm,
            membrane: Some(MembraneConfig {
                thickness_nm: MEMBRANE_THICKNESS_NM,
                n: DIAMOND_INDEX,
                sigma_rms_nm: MEMBRANE_ROUGHNESS_NM,
            }),
            gap2_nm: PARASITIC_GAP_NM,
            plane_mirror: MirrorConfig::Fixture,
            r_c_um: FIBER_RADIUS_OF_CURVATURE_UM,
            implant_depth_nm: IMPLANT_DEPTH_NM,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("assembly config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn build(&self) -> Result<CavityAssembly> {
        let membrane = match &self.membrane {
            None => None,
            Some(m) => {
                let layer = Layer::new(Material::new("diamond", m.n)?, m.thickness_nm)?;
                Some(if m.sigma_rms_nm > 0.0 {
                    layer.with_roughness(m.sigma_rms_nm)?
                } else {
                    layer
                })
            }
        };
        CavityAssembly::new(
            self.fiber_mirror.build()?,
            self.gap_nm,
            membrane,
            self.gap2_nm,
            self.plane_mirror.build()?,
            self.r_c_um,
            self.implant_depth_nm,
        )
    }
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self::reference(10_000.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doc_example_parses() {
        let text = r#"{
          "fiber_mirror": { "kind": "fixture" },
          "gap_nm": 9000.0,
          "membrane": { "thickness_nm": 1420.0, "n": 2.417, "sigma_rms_nm": 3.6 },
          "gap2_nm": 250.0,
          "plane_mirror": { "kind": "quarter_wave", "center_wavelength_nm": 736.0,
                            "n_high": 2.05561, "n_low": 1.46, "pairs": 11 },
          "r_c_um": 45.0,
          "implant_depth_nm": 75.0
        }"#;
        let cfg = AssemblyConfig::from_json(text).unwrap();
        let a = cfg.build().unwrap();
        assert_eq!(a, CavityAssembly::reference(9000.0).unwrap());
    }

    #[test]
    fn reference_config_matches_reference_assembly() {
        assert_eq!(
            AssemblyConfig::reference(7000.0).build().unwrap(),
            CavityAssembly::reference(7000.0).unwrap()
        );
    }

    #[test]
    fn explicit_layers_and_errors() {
        let text = r#"{
          "fiber_mirror": { "kind": "layers", "substrate": {"n": 1.45},
                            "layers": [{"n": 2.1, "thickness_nm": 87.6}] },
          "gap_nm": 100.0,
          "plane_mirror": { "kind": "perfect" },
          "r_c_um": 45.0
        }"#;
        let a = AssemblyConfig::from_json(text).unwrap().build().unwrap();
        assert_eq!(a.fiber_mirror.layers.len(), 1);
        assert!(a.membrane().is_none());

        assert!(AssemblyConfig::from_json(r#"{"gap_nm": 1}"#).is_err());
        let bad = text.replace("87.6", "-1");
        assert!(AssemblyConfig::from_json(&bad).unwrap().build().is_err());
        let unknown = text.replace("\"r_c_um\"", "\"rc\"");
        assert!(AssemblyConfig::from_json(&unknown).is_err());
    }
}
