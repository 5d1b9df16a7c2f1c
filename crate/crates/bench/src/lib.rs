//! Shared inputs for the criterion benches.

use nlb_core::{NodeId, TemporalLink};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` links between uniformly random nodes, one per tick.
pub fn random_links(n: usize, num_nodes: usize, seed: u64) -> Vec<TemporalLink> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let src: NodeId = rng.random_range(0..num_nodes as u32);
            let dst: NodeId = rng.random_range(0..num_nodes as u32);
            TemporalLink::new(src, dst, i as i64, i as u64)
        })
        .collect()
}
