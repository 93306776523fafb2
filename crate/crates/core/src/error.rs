use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FinslerError {
    #[error("point {coords:?} is outside the admissible domain (gauge {gauge}, margin {margin})")]
    PointOutsideDomain { coords: Vec<f64>, gauge: f64, margin: f64 },

    #[error("zero vector where a nonzero direction is required (|y| = {norm:e})")]
    ZeroVector { norm: f64 },

    #[error("fundamental tensor is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    DegenerateTensor { min_eigenvalue: f64 },

    #[error("flag is degenerate: flagpole and edge are (numerically) dependent")]
    DegenerateFlag,

    #[error("tangent span is degenerate (gram determinant {gram:e})")]
    DegenerateSpan { gram: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("integrator exceeded {max_steps} steps before reaching t = {target}")]
    StepLimitExceeded { max_steps: usize, target: f64 },

    #[error("numerical noise: {what} (discrepancy {discrepancy:e}, allowed {allowed:e})")]
    NumericalNoise {
        what: &'static str,
        discrepancy: f64,
        allowed: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {field}: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("model does not support {0}")]
    UnsupportedModel(&'static str),

    #[error("model is inadmissible for the comparison theorem: {0}")]
    InadmissibleModel(String),
}

pub type Result<T> = std::result::Result<T, FinslerError>;

impl FinslerError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        FinslerError::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for the failures a numerical routine might recover from by
    /// shrinking its step (stage points that left the chart).
    pub fn is_domain(&self) -> bool {
        matches!(self, FinslerError::PointOutsideDomain { .. })
    }
}
