use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph has {edges} edges, exceeding the limit of {limit} for {what}")]
    TooManyEdges {
        what: &'static str,
        edges: usize,
        limit: usize,
    },

    #[error("{0} are not connected in this configuration")]
    NotConnected(String),

    #[error("unknown vertex {0}")]
    UnknownVertex(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("cost guard exceeded: {0}")]
    CostGuard(String),

    #[error("rejection sampling gave up after {attempts} attempts (acceptance rate below {rate:.3e})")]
    AttemptCap { attempts: u64, rate: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
