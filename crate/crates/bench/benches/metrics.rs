use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use litref_bench::segments;
use litref_core::metrics::{bleu_corpus, chrfpp_corpus, BleuConfig, ChrfConfig};

fn corpus_metrics(c: &mut Criterion) {
    let segs = segments(2_000, 3, 30, 5);
    let mut g = c.benchmark_group("corpus_metrics");
    g.throughput(Throughput::Elements(segs.len() as u64));
    g.sample_size(10);
    g.bench_function("bleu", |b| {
        b.iter(|| black_box(bleu_corpus(&segs, &BleuConfig::default()).unwrap()))
    });
    g.bench_function("chrf++", |b| {
        b.iter(|| black_box(chrfpp_corpus(&segs, &ChrfConfig::default()).unwrap()))
    });
    g.finish();
}

criterion_group!(benches, corpus_metrics);
criterion_main!(benches);
