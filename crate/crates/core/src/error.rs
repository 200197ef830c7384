use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },
    #[error("window length mismatch: expected {expected}, got {actual}")]
    Arity { expected: usize, actual: usize },
    #[error("matrix is not symmetric positive semidefinite: {0}")]
    NotPsd(String),
    #[error("curvature floor violated: smallest eigenvalue {min_eigenvalue:.3e} < floor {floor:.3e}")]
    CurvatureFloorViolated { min_eigenvalue: f64, floor: f64 },
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("singular matrix: smallest eigenvalue {0:.3e}")]
    SingularMatrix(f64),
    #[error("projection did not converge: residual {residual:.3e} after {iterations} iterations")]
    ProjectionNotConverged { residual: f64, iterations: usize },
    #[error("comparator search did not converge: residual {residual:.3e} after {iterations} iterations")]
    ComparatorNotConverged { residual: f64, iterations: usize },
    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("system construction failed: {0}")]
    Construction(String),
    #[error("misaligned histories: {0}")]
    History(String),
    #[error("memory m = {m} too small: certified truncation error {certified:.3e} exceeds budget {budget:.3e}")]
    TruncationBudget { m: usize, certified: f64, budget: f64 },
    #[error("horizon mismatch: {0}")]
    HorizonMismatch(String),
    #[error("unknown {kind} `{name}`; registered: {available}")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },
    #[error("sweep cell (T = {horizon}, seed = {seed}) failed: {source}")]
    Cell {
        horizon: usize,
        seed: u64,
        source: Box<Error>,
    },
    #[error("slope fit failed: {0}")]
    Fit(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Prefixes the field path of a configuration error.
    pub fn at(self, prefix: &str) -> Self {
        match self {
            Error::Config { path, message } => Error::Config { path: format!("{prefix}.{path}"), message },
            other => other,
        }
    }

    pub(crate) fn shape(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
