use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    IoBare(#[from] std::io::Error),

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("line {line}: timestamp {ts} decreases (previous {prev})")]
    DecreasingTimestamp { line: u64, ts: i64, prev: i64 },

    #[error("line {line}: expected {expected} feature columns, found {found}")]
    RaggedFeatures {
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("empty stream")]
    EmptyStream,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("slot count s must be at least 1 for hashing")]
    ZeroSlots,

    #[error("unknown node id {node} (table has {num_nodes} nodes)")]
    UnknownNode { node: u64, num_nodes: usize },

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("bad binary format: {0}")]
    Format(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
