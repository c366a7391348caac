use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("spill guard: {0}")]
    Spill(String),
    #[error("map is not a diffeomorphism: min J = {min_j:.3e} <= {threshold:.3e}")]
    Diffeomorphism { min_j: f64, threshold: f64 },
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("CFL violated: dt = {dt:.3e} exceeds {limit:.3e}")]
    Cfl { dt: f64, limit: f64 },
    #[error("insufficient history: need {needed} levels, have {have}")]
    InsufficientHistory { needed: usize, have: usize },
    #[error("missing time derivatives: {0}")]
    MissingRates(String),
    #[error("bracket failure: {0}")]
    Bracket(String),
    #[error("fixed-point iteration does not contract: {0}")]
    NonContraction(String),
    #[error("nonpositive sample in series at index {0}")]
    NonPositive(usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("linear solver failure: {0}")]
    Solver(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}
