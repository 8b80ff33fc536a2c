use thiserror::Error;

pub type Result<T> = std::result::Result<T, SpecError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },
    #[error("eigensolver did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("degenerate spectrum: {0}")]
    Degenerate(String),
    #[error("value outside domain: {0}")]
    Domain(String),
    #[error("evaluator failed: {0}")]
    Evaluator(String),
    #[error("inverse iteration stagnated at E = {energy}")]
    Stagnation { energy: f64 },
    #[error("box dependence {shift:.3e} above tolerance at half-width {half_width}")]
    BoxDependence { shift: f64, half_width: f64 },
    #[error("accuracy target unmet: {0}")]
    Accuracy(String),
    #[error("tail budget exceeded: {0}")]
    TailBudget(String),
    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SpecError {
    fn from(e: std::io::Error) -> Self {
        SpecError::Io(e.to_string())
    }
}
