use thiserror::Error;

/// Errors raised by the geometry routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeomError {
    /// Operands live in incompatible spaces (signature, algebra, dimension).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A matrix failed orthogonality validation for its signature.
    #[error("invalid map: orthogonality residual {residual:.3e} exceeds {threshold:.1e}")]
    InvalidMap { residual: f64, threshold: f64 },

    /// The octonionic projector was asked for a vector outside the supported affine charts.
    #[error("unsupported chart: {0}")]
    UnsupportedChart(String),

    #[error("degenerate chart at u = {at:?}: smallest singular value {sigma_min:.3e}")]
    DegenerateChart { at: Vec<f64>, sigma_min: f64 },

    #[error("chart evaluation produced non-finite values at u = {0:?}")]
    NonFinite(Vec<f64>),

    #[error("envelope degenerate: |grad r| = {grad_norm:.6} >= 1 at u = {at:?}")]
    EnvelopeDegenerate { at: Vec<f64>, grad_norm: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("integrator failure: {0}")]
    Integrator(String),

    #[error("decomposition failed: best residual {best_residual:.3e}")]
    DecompositionFailed { best_residual: f64 },

    #[error("insufficient samples: got {got}, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    /// A failure inside a sweep, tagged with the chart point being evaluated.
    #[error("at u = {u:?}: {source}")]
    AtSample { u: Vec<f64>, source: Box<GeomError> },

    #[error("unknown name: {0}")]
    Unknown(String),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T, E = GeomError> = std::result::Result<T, E>;

impl From<std::io::Error> for GeomError {
    fn from(e: std::io::Error) -> Self {
        GeomError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for GeomError {
    fn from(e: serde_json::Error) -> Self {
        GeomError::Parse(e.to_string())
    }
}
