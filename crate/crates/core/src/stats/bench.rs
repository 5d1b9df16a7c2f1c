use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sampler::{HistoryStore, NeighborTable, SamplerConfig};
use crate::stream::TemporalLink;
use crate::Result;

/// Per-length cost of forward-table maintenance and of a backward
/// uniform-sampling query over the accumulated history.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub events: usize,
    pub update_ns_mean: f64,
    pub update_ns_std: f64,
    pub oracle_ns_mean: f64,
    pub oracle_ns_std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

fn random_stream(n: usize, num_nodes: usize, seed: u64) -> Vec<TemporalLink> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let src = rng.random_range(0..num_nodes as u32);
            let dst = rng.random_range(0..num_nodes as u32);
            TemporalLink::new(src, dst, i as i64, i as u64)
        })
        .collect()
}

/// Times `update` over streams of each length on a table of `num_nodes`
/// nodes, and times `sample_uniform` queries against the history built from
/// the same streams. Every length is repeated until at least as many events
/// as the longest stream have been timed, and never fewer than `reps` times.
pub fn bench_update_scaling(
    cfg: &SamplerConfig,
    lengths: &[usize],
    reps: usize,
    num_nodes: usize,
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    let max_len = lengths.iter().copied().max().unwrap_or(0);
    let stream = random_stream(max_len, num_nodes, seed);
    let mut table = NeighborTable::new(num_nodes, *cfg)?;
    let reps = reps.max(1);

    // Warm-up.
    for l in &stream[..max_len.min(100_000)] {
        table.update(l);
    }

    let mut rows = Vec::with_capacity(lengths.len());
    let mut query_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for &n in lengths {
        let events = &stream[..n];
        let n_reps = reps.max(max_len.div_ceil(n.max(1))).min(1_000);
        let mut per_event = Vec::with_capacity(n_reps);
        for _ in 0..n_reps {
            table.clear();
            let start = Instant::now();
            for l in events {
                table.update(black_box(l));
            }
            per_event.push(start.elapsed().as_nanos() as f64 / n.max(1) as f64);
        }
        black_box(table.raw_slots());
        let (update_ns_mean, update_ns_std) = mean_std(&per_event);

        let mut history = HistoryStore::new(num_nodes);
        for l in events {
            history.push(l);
        }
        let t_query = n as i64;
        let queries = 200usize;
        let mut per_query = Vec::with_capacity(reps);
        for _ in 0..reps {
            let start = Instant::now();
            for _ in 0..queries {
                let u = query_rng.random_range(0..num_nodes as u32);
                black_box(history.sample_uniform(u, t_query, cfg.slots, &mut query_rng));
            }
            per_query.push(start.elapsed().as_nanos() as f64 / queries as f64);
        }
        let (oracle_ns_mean, oracle_ns_std) = mean_std(&per_query);

        rows.push(ScalingRow {
            events: n,
            update_ns_mean,
            update_ns_std,
            oracle_ns_mean,
            oracle_ns_std,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn produces_one_row_per_length() {
        let rows =
            bench_update_scaling(&SamplerConfig::default(), &[100, 1_000], 2, 50, 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].events, 1_000);
        assert!(rows
            .iter()
            .all(|r| r.update_ns_mean > 0.0 && r.oracle_ns_mean > 0.0));
    }
}
