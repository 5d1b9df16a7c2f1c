use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion, Throughput};
use nlb_bench::random_links;
use nlb_core::sampler::{hash_edge, hash_node, HistoryStore};
use nlb_core::{NeighborTable, SamplerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NODES: usize = 1000;

fn update(c: &mut Criterion) {
    let mut group = c.benchmark_group("table_update");
    for &n in &[10_000usize, 100_000, 1_000_000] {
        let links = random_links(n, NODES, 1);
        group.throughput(Throughput::Elements(n as u64));
        for (name, cfg) in [
            ("edge", SamplerConfig::edge(10, 0.9)),
            ("node", SamplerConfig::node(10, 0.9)),
        ] {
            group.bench_with_input(BenchmarkId::new(name, n), &links, |b, links| {
                b.iter_batched_ref(
                    || NeighborTable::new(NODES, cfg).unwrap(),
                    |t| {
                        for l in links {
                            t.update(l);
                        }
                    },
                    BatchSize::LargeInput,
                )
            });
        }
    }
    group.finish();

    let links = random_links(100_000, NODES, 2);
    let mut group = c.benchmark_group("batch_update");
    group.throughput(Throughput::Elements(links.len() as u64));
    for &bs in &[1usize, 100, 1000] {
        group.bench_with_input(BenchmarkId::from_parameter(bs), &bs, |b, &bs| {
            b.iter_batched_ref(
                || NeighborTable::new(NODES, SamplerConfig::edge(10, 0.9)).unwrap(),
                |t| {
                    for chunk in links.chunks(bs) {
                        t.batch_update(chunk);
                    }
                },
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn snapshot(c: &mut Criterion) {
    let mut group = c.benchmark_group("snapshot");
    for &s in &[5usize, 10, 30] {
        let mut table = NeighborTable::new(NODES, SamplerConfig::edge(s, 0.9)).unwrap();
        for l in &random_links(200_000, NODES, 3) {
            table.update(l);
        }
        let mut buf = Vec::with_capacity(s);
        let mut u = 0u32;
        group.bench_function(BenchmarkId::from_parameter(s), |b| {
            b.iter(|| {
                u = (u + 1) % NODES as u32;
                table.snapshot_into(black_box(u), &mut buf).unwrap();
                black_box(buf.len())
            })
        });
    }
    group.finish();
}

fn oracle_uniform(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle_uniform");
    for &n in &[10_000usize, 100_000, 1_000_000] {
        let mut hist = HistoryStore::new(NODES);
        for l in &random_links(n, NODES, 4) {
            hist.push(l);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut u = 0u32;
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| {
                u = (u + 1) % NODES as u32;
                black_box(hist.sample_uniform(u, n as i64, 10, &mut rng))
            })
        });
    }
    group.finish();
}

fn hash(c: &mut Criterion) {
    let cfg = SamplerConfig::edge(10, 0.9);
    let mut group = c.benchmark_group("hash");
    group.bench_function("edge", |b| {
        let mut v = 0u64;
        b.iter(|| {
            v = v.wrapping_add(1);
            black_box(hash_edge(black_box(v), black_box(v as i64 * 3), &cfg).unwrap())
        })
    });
    group.bench_function("node", |b| {
        let mut v = 0u64;
        b.iter(|| {
            v = v.wrapping_add(1);
            black_box(hash_node(black_box(v), &cfg).unwrap())
        })
    });
    group.finish();
}

criterion_group!(benches, update, snapshot, oracle_uniform, hash);
criterion_main!(benches);
