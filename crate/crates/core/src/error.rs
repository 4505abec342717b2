use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("polynomial is not concave: {0}")]
    NotConcave(String),

    #[error(
        "constraint is not monic (q(0) != I): {0}; positivity need not imply module membership \
         without monicity, e.g. q = [[x,1],[1,0]] or q = [[1,x],[x,0]]"
    )]
    NonMonic(String),

    #[error("degree bound exceeded: {0}")]
    DegreeOverflow(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("missing moment: {0}")]
    MissingMoment(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("no certificate exists: {0}")]
    Nonexistence(String),

    #[error("mixing destroyed the separation margin: {0}")]
    MarginDestroyed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
