use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid channel index {0} (expected 0..=9)")]
    InvalidChannel(usize),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("lattice radius {radius} too small for order j+k={order}; need radius >= {required}")]
    RadiusTooSmall {
        radius: u32,
        order: usize,
        required: u32,
    },

    #[error("expansion order j+k={order} exceeds the supported maximum {max}")]
    OrderTooLarge { order: usize, max: usize },

    #[error("polynomial has a non-real coefficient: {0}")]
    NonReal(String),

    #[error("derived polynomial {name} differs from the reference expression:\n{diff}")]
    GoldenMismatch { name: String, diff: String },

    #[error("dense simulation limited to {max} qubits, lattice has {qubits}")]
    TooManyQubits { qubits: usize, max: usize },

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error("estimator guard: {0}")]
    EstimatorGuard(String),

    #[error("estimate has imaginary residue {0:e}")]
    ImaginaryResidue(f64),

    #[error("singular Jacobian (smallest singular value {sigma_min:e}) at iteration {iteration}")]
    SingularJacobian { sigma_min: f64, iteration: usize },

    #[error("no candidate passed the residual filters after {tried} starts (best F residual {best_f:e}, best G residual {best_g:e}); loosen the thresholds or raise the start count")]
    NoCandidate {
        tried: usize,
        best_f: f64,
        best_g: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case tag for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidChannel(_) => "invalid_channel",
            Error::InvalidLattice(_) => "invalid_lattice",
            Error::RadiusTooSmall { .. } => "radius_too_small",
            Error::OrderTooLarge { .. } => "order_too_large",
            Error::NonReal(_) => "non_real",
            Error::GoldenMismatch { .. } => "golden_mismatch",
            Error::TooManyQubits { .. } => "too_many_qubits",
            Error::NotHermitian(_) => "not_hermitian",
            Error::InvalidExperiment(_) => "invalid_experiment",
            Error::EstimatorGuard(_) => "estimator_guard",
            Error::ImaginaryResidue(_) => "imaginary_residue",
            Error::SingularJacobian { .. } => "singular_jacobian",
            Error::NoCandidate { .. } => "no_candidate",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
