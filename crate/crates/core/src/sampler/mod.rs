//! Temporal neighbor sampling.
//!
//! [`forward`] holds the O(1) per-event hash tables; [`oracle`] holds the
//! backward samplers over full history used as baselines and as
//! brute-force references.

pub mod forward;
pub mod oracle;

pub use forward::{
    hash_edge, hash_node, is_prime, KeyScheme, NeighborSlot, NeighborTable, SamplerConfig,
    SnapshotEntry, DEFAULT_Q1, DEFAULT_Q2,
};
pub use oracle::{HistEntry, HistoryStore};
