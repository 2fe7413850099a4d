use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use litref_bench::segments;
use litref_core::metrics::{Bleu, BleuConfig};
use litref_core::significance::{paired_bootstrap_stats, BootstrapConfig, StatsMatrix};

fn bootstrap(c: &mut Criterion) {
    let bleu = Bleu::new(BleuConfig::default()).unwrap();
    let base = StatsMatrix::compute(&bleu, &segments(1_000, 2, 25, 1));
    let sys = StatsMatrix::compute(&bleu, &segments(1_000, 2, 25, 2));
    let cfg = BootstrapConfig::default();
    let mut g = c.benchmark_group("paired_bootstrap");
    g.sample_size(10);
    g.bench_function("1000 segments x 1000 resamples", |b| {
        b.iter(|| black_box(paired_bootstrap_stats(&bleu, &base, &sys, &cfg).unwrap()))
    });
    g.finish();
}

criterion_group!(benches, bootstrap);
criterion_main!(benches);
