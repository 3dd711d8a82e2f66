//! Physical constants and reference values shared by every pipeline.
//!
//! Everything that one module assumes and another module must agree on lives
//! here, so the TMM solver and the Purcell model see the same diamond index.
//! [`ConstantsRecord`] is echoed into CLI outputs.

use serde::Serialize;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Refractive index of diamond near 737 nm.
pub const DIAMOND_INDEX: f64 = 2.417;

/// Fused silica (mirror and fiber substrates) near 736 nm.
pub const SILICA_INDEX: f64 = 1.454;

/// Nominal Ta2O5 index.
pub const TA2O5_INDEX: f64 = 2.10;

/// SiO2 coating layer index.
pub const SIO2_INDEX: f64 = 1.46;

/// Coating design wavelength, nm.
pub const COATING_WAVELENGTH_NM: f64 = 736.0;

/// Quoted coating transmission at the design wavelength, ppm.
pub const COATING_TRANSMISSION_PPM: f64 = 1480.0;

/// Number of (SiO2, Ta2O5) pairs in the fixture coating.
pub const FIXTURE_MIRROR_PAIRS: usize = 11;

/// High index of the fixture coating, solved so that 11 pairs on silica
/// transmit 1480 ppm at 736 nm into air.
pub const FIXTURE_HIGH_INDEX: f64 = 2.05561;

/// Excess (absorption + scatter) loss per coated mirror, ppm.
pub const MIRROR_EXCESS_LOSS_PPM: f64 = 20.0;

/// Measured membrane excess loss per round trip, ppm.
pub const MEMBRANE_EXCESS_LOSS_PPM: f64 = 2100.0;

/// Membrane surface roughness, nm RMS.
pub const MEMBRANE_ROUGHNESS_NM: f64 = 3.6;

/// Membrane thickness, nm.
pub const MEMBRANE_THICKNESS_NM: f64 = 1420.0;

/// Parasitic gap between membrane and plane mirror, nm.
pub const PARASITIC_GAP_NM: f64 = 250.0;

/// Fiber dimple radius of curvature, um.
pub const FIBER_RADIUS_OF_CURVATURE_UM: f64 = 45.0;

/// Target Si implantation depth below the fiber-facing membrane surface, nm.
pub const IMPLANT_DEPTH_NM: f64 = 75.0;

/// Default Debye-Waller factor of the SiV- ZPL.
pub const DEBYE_WALLER: f64 = 0.84;

/// SiV- ground-state splitting, GHz.
pub const SIV_GROUND_SPLITTING_GHZ: f64 = 50.0;

/// Sum of SiV- ground- and excited-state splittings, GHz.
pub const SIV_COMBINED_SPLITTING_GHZ: f64 = 310.0;

/// Inhomogeneous linewidth of the C/D line of the ensemble at 4 K, GHz.
pub const ENSEMBLE_LINEWIDTH_GHZ: f64 = 310.0;

/// A/B and C/D line centres at 60-80 K, nm.
pub const ZPL_AB_NM: f64 = 736.57;
pub const ZPL_CD_NM: f64 = 737.25;

/// Low-temperature limit of the mean ZPL centre, nm.
pub const ZPL_LOW_T_NM: f64 = 736.86;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Version of this constants table; bump whenever a value changes.
pub const CONSTANTS_VERSION: u32 = 1;

/// Optical frequency in GHz for a vacuum wavelength in nm.
pub fn frequency_ghz(wavelength_nm: f64) -> f64 {
    SPEED_OF_LIGHT / wavelength_nm
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantsRecord {
    pub constants_version: u32,
    pub toolkit_version: &'static str,
    pub speed_of_light_m_per_s: f64,
    pub diamond_index: f64,
    pub silica_index: f64,
    pub debye_waller: f64,
    pub fixture_high_index: f64,
    pub fixture_low_index: f64,
    pub fixture_mirror_pairs: usize,
}

pub fn record() -> ConstantsRecord {
    ConstantsRecord {
        constants_version: CONSTANTS_VERSION,
        toolkit_version: TOOLKIT_VERSION,
        speed_of_light_m_per_s: SPEED_OF_LIGHT,
        diamond_index: DIAMOND_INDEX,
        silica_index: SILICA_INDEX,
        debye_waller: DEBYE_WALLER,
        fixture_high_index: FIXTURE_HIGH_INDEX,
        fixture_low_index: SIO2_INDEX,
        fixture_mirror_pairs: FIXTURE_MIRROR_PAIRS,
    }
}
