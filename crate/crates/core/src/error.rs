use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("coordinate overflow at ({x}, {y})")]
    Overflow { x: i64, y: i64 },

    #[error("budget exceeded: {what} = {requested} (limit {limit})")]
    Budget {
        what: &'static str,
        requested: u64,
        limit: u64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("quadrature did not converge: achieved error {achieved:e} > tolerance {tolerance:e}")]
    Quadrature { achieved: f64, tolerance: f64 },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("expansion does not contract (spectral bound {bound})")]
    NonContracting { bound: f64 },

    #[error("censoring rate {rate} exceeds {limit}")]
    ExcessCensoring { rate: f64, limit: f64 },

    #[error("counterexample: {0}")]
    Counterexample(String),
}
