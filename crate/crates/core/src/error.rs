//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by descriptors, solvers and the path-count engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} is outside the {kind} index set")]
    IndexOutOfDomain { index: i64, kind: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("descriptor error: {0}")]
    Descriptor(String),

    #[error("window not certifiable: column support of row {row} cannot be bounded")]
    WindowNotCertifiable { row: i64 },

    #[error("path enumeration budget exceeded after {expansions} expansions (limit {limit})")]
    BudgetExceeded { expansions: u64, limit: u64 },

    #[error("power iteration did not converge within {iterations} iterations; last Rayleigh quotients {last} and {previous}")]
    NoConvergence {
        iterations: usize,
        last: f64,
        previous: f64,
    },

    #[error("growth rate undefined: the fitted window contains only zero coefficients")]
    UndefinedGrowth,

    #[error("Markov property violated: piece {piece} of element {element} covers element {target} only partially")]
    MarkovViolation {
        element: i64,
        piece: usize,
        target: i64,
    },

    #[error("shortest path from {from} to {to} not found within horizon {horizon}")]
    PathNotFound { from: i64, to: i64, horizon: usize },

    #[error("refused: {0}")]
    Refused(String),

    #[error("unknown family: {0}; use the numeric classifier instead")]
    UnknownFamily(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
