//! Pairwise semantic similarity between references, the per-group mean
//! (`sim_p`), similarity bins and score histograms.

mod bins;
mod embedding;
mod histogram;
mod import;
mod scored;
mod scorer;

pub use bins::{assign_bin, BinAssignment, HighSubcategory, SimilarityBin, Thresholds};
pub use embedding::{load_embeddings, EmbeddingLoad, EmbeddingTable};
pub use histogram::{histogram, HistogramBin};
pub use import::{import_scores, ImportedScores, SCORE_CSV_HEADER};
pub use scored::{
    read_scored, score_stream, sim_p, write_scored, write_scored_group, GroupScorer, PairScore,
    ScoreTable, ScoredGroup, StreamSummary,
};
pub use scorer::{cosine, pair_count, score_pair, EmbeddingScorer, PairFailure, SimilarityScorer};
