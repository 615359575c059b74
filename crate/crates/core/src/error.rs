use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by graph construction, simulation and estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {vertex} out of range for graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),

    #[error("graph would have {requested} vertices, above the limit of {limit}")]
    TooLarge { requested: u128, limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph is disconnected: {unreached} of {n} vertices unreachable from source {source_vertex}")]
    Disconnected {
        source_vertex: usize,
        unreached: usize,
        n: usize,
    },

    #[error("interval is reversed: a = {a} > b = {b}")]
    ReversedInterval { a: f64, b: f64 },

    #[error("vertex {0} does not appear in the trace")]
    VertexNotInTrace(usize),

    #[error("trace {index} covers {found} vertices, expected {expected}")]
    TraceMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("rejection sampling accepted 0 of {attempts} draws (acceptance rate {rate:.4})")]
    RejectionCapExceeded { attempts: usize, rate: f64 },

    #[error("{what} took {elapsed_s:.1} s, over the {limit_s} s budget; {hint}")]
    BudgetExceeded {
        what: String,
        elapsed_s: f64,
        limit_s: u64,
        hint: String,
    },

    #[error("parse error in {path:?} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
