//! Sweep throughput, sequential versus parallel.
//!
//! `workers = 1` runs every phase inline on the calling thread; larger
//! worker counts use the work-stealing z-phase and the rayon Φ-phase. Build
//! with `--no-default-features` to compare against the crate compiled
//! without rayon at all.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use pclda::chain::{Chain, ChainOptions, SamplerKind};
use pclda::synthetic::{generate, SyntheticSpec};
use pclda::{Corpus, HyperParams, TopicState};

fn corpus() -> Corpus {
    generate(&SyntheticSpec {
        docs: 2000,
        vocab: 5000,
        topics: 50,
        doc_len: 100,
        seed: 3,
        ..SyntheticSpec::default()
    })
    .unwrap()
    .corpus
}

fn worker_counts() -> Vec<usize> {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut w = vec![1, 2, 4];
    if cores > 4 {
        w.push(cores);
    }
    w
}

fn bench_sampler(c: &mut Criterion, kind: SamplerKind, k: usize) {
    let corpus = corpus();
    let h = HyperParams::new(0.1, 0.01, k).unwrap();
    let mut group = c.benchmark_group(format!("{kind}-k{k}"));
    group.sample_size(10);
    group.throughput(Throughput::Elements(corpus.num_tokens() as u64));
    for workers in worker_counts() {
        let state = TopicState::init(&corpus, k, 1).unwrap();
        let opts = ChainOptions {
            workers,
            ..ChainOptions::default()
        };
        let mut chain = Chain::new(&corpus, h, kind, state, 1, opts).unwrap();
        for _ in 0..5 {
            chain.step().unwrap();
        }
        let label = if workers == 1 { "sequential" } else { "parallel" };
        group.bench_with_input(BenchmarkId::new(label, workers), &workers, |b, _| {
            b.iter(|| chain.step().unwrap())
        });
    }
    group.finish();
}

fn sweeps(c: &mut Criterion) {
    bench_sampler(c, SamplerKind::Pclda, 100);
    bench_sampler(c, SamplerKind::LightPclda, 100);
    bench_sampler(c, SamplerKind::Adlda, 100);
    bench_sampler(c, SamplerKind::Pclda, 1000);
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
