use thiserror::Error;

/// Errors raised by system construction, analysis and norm evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuarkletError {
    #[error("invalid spline order m = {0}: the order must be at least 1")]
    InvalidOrder(usize),

    /// A parameter constraint failed; the message names the violated inequality.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("level j = {level} is below the admissible minimum {min}")]
    Level { level: i32, min: i32 },

    #[error("index {index} is not contained in {set}")]
    Index { index: String, set: String },

    #[error("index {index} must be built by the {expected} constructor")]
    WrongConstructor { index: String, expected: &'static str },

    #[error("boundary quarklet construction failed for {index}: moment matrix has trivial kernel (singular value ratio {ratio:.3e})")]
    ConstructionFailed { index: String, ratio: f64 },

    #[error("cascade iteration diverged: sup norm grew by a factor {growth:.3e} within {iterations} iterations")]
    Divergence { growth: f64, iterations: usize },

    #[error("degenerate refinement mask: {0}")]
    DegenerateMask(String),

    #[error("point {0} lies outside the closed unit cube")]
    Domain(String),

    #[error("ill-conditioned Gram matrix: condition number {0:.3e} exceeds 1e12")]
    IllConditioned(f64),

    /// A hypothesis of the characterization theorems does not hold.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("unknown test function '{0}'")]
    UnknownFunction(String),
}

pub type Result<T> = std::result::Result<T, QuarkletError>;
