//! Multi-reference literary translation datasets: corpus handling, reference
//! similarity and binning, dataset recipes, book-disjoint splits, corpus
//! metrics, paired bootstrap tests and exports.
//!
//! Every randomized step takes an explicit seed and every parallel step
//! produces the same output for any thread count.

pub mod corpus;
pub mod dataset;
pub mod error;
pub mod export;
pub mod manifest;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod significance;
pub mod similarity;
pub mod split;
pub mod text;

pub use corpus::{
    corpus_stats, filter_by_word_limit, load_corpus, write_corpus, CountInstances, Corpus,
    CorpusStats, InstanceCount, ParallelGroup, ReferenceText, Validation,
};
pub use dataset::{Dataset, DatasetSpec, Recipe, TrainingInstance};
pub use error::{Error, Result};
pub use export::{ExportFormat, PromptOptions, PROMPT_DELIMITER};
pub use manifest::Manifest;
pub use metrics::{
    Bleu, BleuConfig, Chrf, ChrfConfig, CorpusMetric, MetricConfig, MetricReport, SegmentEval,
};
pub use pipeline::{pipeline_all, PipelineConfig};
pub use significance::{BootstrapConfig, SignificanceResult};
pub use similarity::{
    EmbeddingScorer, EmbeddingTable, HighSubcategory, ScoreTable, ScoredGroup, SimilarityBin,
    SimilarityScorer, Thresholds,
};
pub use split::{SplitResult, SplitSpec};
