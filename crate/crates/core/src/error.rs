use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-physical refractive index {n} for `{material}` (must be >= 1)")]
    NonPhysicalIndex { material: String, n: f64 },

    #[error("unstable resonator: length {length_um} um >= radius of curvature {r_c_um} um")]
    UnstableResonator { length_um: f64, r_c_um: f64 },

    #[error("wavelength {wavelength_nm} nm is off resonance (nearest {resonance_nm} nm, half linewidth {half_width_nm} nm)")]
    OffResonance {
        wavelength_nm: f64,
        resonance_nm: f64,
        half_width_nm: f64,
    },

    #[error("depth {depth_nm} nm lies outside the emitter layer [0, {thickness_nm}] nm")]
    OutsideEmitterLayer { depth_nm: f64, thickness_nm: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("fit did not converge after {iterations} iterations (chi2 = {chi_squared})")]
    NotConverged {
        iterations: usize,
        chi_squared: f64,
        best: Vec<f64>,
    },

    #[error("singular Jacobian (condition number {condition:.3e}) at parameters {params:?}")]
    SingularJacobian { condition: f64, params: Vec<f64> },

    #[error("no peak found: {0}")]
    NoPeak(String),

    #[error("trace is not decaying: {0}")]
    NotDecaying(String),

    #[error("non-uniform sampling: {0}")]
    NonUniformSampling(String),

    #[error("{path}: line {line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
