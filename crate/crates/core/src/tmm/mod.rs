//! Normal-incidence transfer-matrix solver and the cavity analyses built on it.

pub mod analytic;
mod dispersion_fit;
mod field;
mod length;
mod map;
mod resonance;
mod response;

pub use dispersion_fit::{fit_dispersion, synthesize_dispersion, DispersionGuess, DispersionPoint};
pub use field::{field_profile, solve_field, FieldProfile, LayerSpan, LayerWave, StackField};
pub use length::{effective_length, EffectiveLength};
pub use map::{dispersion_map, DispersionMap};
pub use resonance::{
    find_resonances, track_mode_orders, CavityModel, ModeCharacter, Resonance, ResonancePoint,
    ResonanceSearch, AIR_LIKE_SLOPE, DIAMOND_LIKE_SLOPE,
};
pub use response::{reflection_coefficient, stack_response, StackResponse};
