//! Damped least squares and the spectral, temperature and decay models.

mod decay;
mod lm;
mod models;
pub mod special;
pub mod synth;

pub use decay::{
    fit_decay_emg, fit_decay_kohlrausch, fit_decay_kohlrausch_with, fit_decay_mono,
    lifetime_with_conservative_bounds, ConservativeLifetime, DecayTrace, Emg, Kohlrausch, MonoExp,
};
pub use lm::{
    lm_fit, numeric_jacobian, FitResult, LmOptions, Param, ParamSpec, Residuals,
    SINGULAR_CONDITION, WARN_CONDITION,
};
pub use models::{
    fit_cubic_temperature, fit_double_lorentzian_equal_width, fit_lorentzian, CubicLaw, CurveModel,
    CurveProblem, DoubleLorentzian, Lorentzian, SpectrumTrace, SpectrumUnit,
};
