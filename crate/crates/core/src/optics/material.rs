use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{DIAMOND_INDEX, SILICA_INDEX};
use crate::error::{Error, Result};

/// Homogeneous, non-dispersive material.
///
/// The complex index is `n + i*kappa` with fields written as `exp(i(kz - wt))`,
/// so `kappa > 0` means absorption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    n: f64,
    #[serde(default)]
    kappa: f64,
}

impl Material {
    pub fn new(name: impl Into<String>, n: f64) -> Result<Self> {
        Self::with_extinction(name, n, 0.0)
    }

    pub fn with_extinction(name: impl Into<String>, n: f64, kappa: f64) -> Result<Self> {
        let name = name.into();
        if !n.is_finite() || n < 1.0 {
            return Err(Error::NonPhysicalIndex { material: name, n });
        }
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(Error::invalid(
                "kappa",
                format!("{kappa} for `{name}` must be >= 0"),
            ));
        }
        Ok(Self { name, n, kappa })
    }

    pub fn air() -> Self {
        Self {
            name: "air".into(),
            n: 1.0,
            kappa: 0.0,
        }
    }

    pub fn silica() -> Self {
        Self {
            name: "silica".into(),
            n: SILICA_INDEX,
            kappa: 0.0,
        }
    }

    pub fn diamond() -> Self {
        Self {
            name: "diamond".into(),
            n: DIAMOND_INDEX,
            kappa: 0.0,
        }
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn complex_index(&self) -> Complex64 {
        Complex64::new(self.n, self.kappa)
    }

    pub fn is_lossless(&self) -> bool {
        self.kappa == 0.0
    }
}

/// Semi-infinite medium bounding a stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Medium {
    Dielectric(Material),
    /// Ideal hard mirror: tangential E vanishes at the surface, r = -1.
    PerfectConductor,
}

impl Medium {
    pub fn material(&self) -> Option<&Material> {
        match self {
            Medium::Dielectric(m) => Some(m),
            Medium::PerfectConductor => None,
        }
    }
}

impl From<Material> for Medium {
    fn from(m: Material) -> Self {
        Medium::Dielectric(m)
    }
}
