//! Monte-Carlo checks of the forward tables' retention laws, and the
//! update-cost scaling benchmark.

mod bench;
mod poisson;
mod retention;

pub use bench::{bench_update_scaling, ScalingRow};
pub use poisson::{gen_poisson_stream, PoissonEvent, PoissonStreamSpec};
pub use retention::{
    edge_retention_theory, measure_retention_edge, measure_retention_node, node_retention_theory,
    quantize_time, wilson_interval, RetentionBin, RetentionCurve, TIME_RESOLUTION,
};
