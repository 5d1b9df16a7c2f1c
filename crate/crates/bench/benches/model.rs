use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nlb_bench::random_links;
use nlb_core::autodiff::Adam;
use nlb_core::model::{Model, ModelConfig};
use nlb_core::train_eval::Engine;
use nlb_core::{SamplerConfig, TemporalStream};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NODES: usize = 1000;

fn stream(n: usize) -> TemporalStream {
    let triples: Vec<_> = random_links(n, NODES, 7)
        .iter()
        .map(|l| (l.src, l.dst, l.ts))
        .collect();
    TemporalStream::from_triples(&triples).unwrap()
}

fn train_step(c: &mut Criterion) {
    let stream = stream(20_000);
    let mut group = c.benchmark_group("train_batch");
    group.sample_size(20);
    for &d in &[32usize, 64] {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = Model::new(ModelConfig::with_dims(d), &mut rng).unwrap();
        let mut engine = Engine::new(&stream, model, SamplerConfig::edge(10, 0.9)).unwrap();
        // Warm tables and statuses.
        for batch in stream.links[..10_000].chunks(200) {
            engine.replay_batch(batch).unwrap();
        }
        let mut opt = Adam::new(1e-4);
        let batch = &stream.links[10_000..10_100];
        let negs: Vec<u32> = batch.iter().map(|l| (l.dst + 1) % NODES as u32).collect();
        group.bench_function(BenchmarkId::new("d", d), |b| {
            b.iter(|| {
                black_box(
                    engine
                        .train_batch(batch, &negs, &mut opt, &mut rng)
                        .unwrap(),
                )
            })
        });
    }
    group.finish();
}

criterion_group!(benches, train_step);
criterion_main!(benches);
