use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use litref_bench::{corpus, embeddings};
use litref_core::similarity::{GroupScorer, Thresholds};
use litref_core::EmbeddingScorer;

fn score_groups(c: &mut Criterion) {
    let scorer = EmbeddingScorer::new(Arc::new(embeddings(20_000, 300, 1)));
    let groups = corpus(500, 4, 40, 20_000, 2);
    let gs = GroupScorer::builtin(&scorer, Thresholds::default());

    let mut g = c.benchmark_group("sim_p");
    g.throughput(Throughput::Elements((groups.len() * 6) as u64));
    g.sample_size(10);
    g.bench_function("500 groups x 4 refs, dim 300", |b| {
        b.iter(|| black_box(gs.score_all(groups.groups()).unwrap()))
    });
    g.finish();
}

criterion_group!(benches, score_groups);
criterion_main!(benches);
