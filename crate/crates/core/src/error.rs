use thiserror::Error;

/// Errors raised by estimation, inference and the finite-model lab.
#[derive(Debug, Error)]
pub enum PlrError {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("tilt overflow at support index {index} (exponent {exponent})")]
    TiltOverflow { index: usize, exponent: f64 },

    #[error("zero mass at observed response (row {row})")]
    ZeroMass { row: usize },

    #[error("empty support atom at index {index}")]
    EmptySupportAtom { index: usize },

    #[error("baseline fixed point did not converge after {iterations} sweeps (last change {last_change:e})")]
    BaselineNonConvergence { iterations: usize, last_change: f64, last_iterate: Vec<f64> },

    #[error("log-likelihood decreased during fixed-point sweep {sweep}: {before} -> {after}")]
    LikelihoodDecrease { sweep: usize, before: f64, after: f64 },

    #[error("zero tilt normaliser for row {row}")]
    ZeroNormaliser { row: usize },

    #[error("degenerate U ratio at support index {index}")]
    DegenerateRatio { index: usize },

    #[error("Jacobian singular (condition estimate {condition:e}): invertibility violated numerically")]
    SingularJacobian { condition: f64 },

    #[error("no incomplete rows")]
    NoIncompleteRows,

    #[error("missingness model: {0}")]
    Missingness(String),

    #[error("separation: {0}")]
    Separation(String),

    #[error("pairwise design degenerate")]
    PairwiseDegenerate,

    #[error("ascent failed: {message}; trace {trace:?}")]
    AscentFailure { message: String, trace: Vec<f64> },

    #[error("too many failed replicates: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },

    #[error("invalid finite model: {0}")]
    InvalidModel(String),

    #[error("singular operator: {0}")]
    SingularOperator(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, PlrError>;
