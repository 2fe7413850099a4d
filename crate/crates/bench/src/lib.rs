//! Synthetic inputs shared by the benchmarks.

use litref_core::corpus::{Corpus, ParallelGroup, ReferenceText};
use litref_core::metrics::SegmentEval;
use litref_core::rng;
use litref_core::EmbeddingTable;
use rand::Rng as _;

pub fn token(i: usize) -> String {
    format!("w{i}")
}

/// `vocab` tokens `w0..` with uniform components in [-1, 1).
pub fn embeddings(vocab: usize, dim: usize, seed: u64) -> EmbeddingTable {
    let mut r = rng::labeled(seed, "embeddings");
    let entries = (0..vocab).map(|i| {
        let v: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        (token(i), v)
    });
    EmbeddingTable::from_entries(entries)
        .expect("synthetic table is well formed")
        .table
}

fn sentence(r: &mut rng::Rng, vocab: usize, words: usize) -> String {
    (0..words)
        .map(|_| token(r.random_range(0..vocab)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Groups spread over `languages` and `books` per language, each with
/// `refs` references of `words` tokens drawn from a `vocab`-token vocabulary.
pub fn corpus(groups: usize, refs: usize, words: usize, vocab: usize, seed: u64) -> Corpus {
    let mut r = rng::labeled(seed, "corpus");
    let groups = (0..groups)
        .map(|i| {
            let language = format!("l{}", i % 4);
            ParallelGroup {
                group_id: format!("g{i}"),
                book_id: format!("{language}-b{}", (i / 4) % 10),
                language,
                paragraph_index: i as u64,
                source_text: sentence(&mut r, vocab, words),
                references: (0..refs)
                    .map(|k| ReferenceText {
                        ref_id: format!("r{k}"),
                        translator_id: None,
                        text: sentence(&mut r, vocab, words),
                    })
                    .collect(),
            }
        })
        .collect();
    Corpus::new(groups).expect("synthetic corpus is valid")
}

/// Segments whose hypothesis shares roughly half its tokens with each reference.
pub fn segments(n: usize, refs: usize, words: usize, seed: u64) -> Vec<SegmentEval> {
    let mut r = rng::labeled(seed, "segments");
    (0..n)
        .map(|i| {
            let references: Vec<String> = (0..refs).map(|_| sentence(&mut r, 200, words)).collect();
            let hypothesis = references[0]
                .split(' ')
                .map(|w| if r.random_bool(0.5) { w.to_string() } else { token(r.random_range(0..200)) })
                .collect::<Vec<_>>()
                .join(" ");
            SegmentEval {
                segment_id: format!("s{i}"),
                language: format!("l{}", i % 4),
                hypothesis,
                references,
            }
        })
        .collect()
}
