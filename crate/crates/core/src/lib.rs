//! Temporal graph representation learning with forward recent sampling.
//!
//! Each node keeps a fixed-size hash table of down-sampled temporal
//! neighbors that is updated in O(1) per event and read directly at query
//! time, with no backtracking over history. On top of the tables sit a
//! small attention encoder with per-node GRU status, a training and
//! evaluation loop for link and node tasks, and a Monte-Carlo harness that
//! checks the tables' retention probabilities against closed forms.

pub mod autodiff;
pub mod error;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod stream;
pub mod train_eval;

pub use error::{Error, Result};
pub use sampler::{KeyScheme, NeighborTable, SamplerConfig};
pub use stream::{NodeId, TemporalLink, TemporalStream, Timestamp};
