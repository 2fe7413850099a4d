use std::sync::Arc;

use super::embedding::{snippet, EmbeddingTable};
use crate::error::{Error, Result};

/// A symmetric text similarity in `[-1, 1]` with `score(a, a) == 1`.
pub trait SimilarityScorer: Send + Sync {
    fn name(&self) -> &str;

    fn score(&self, a: &str, b: &str) -> Result<f64>;

    /// Scores every unordered pair `(i, j)`, `i < j`, in row-major order.
    /// On failure reports the first failing pair in that order.
    fn score_pairs(&self, texts: &[&str]) -> Result<Vec<f64>, PairFailure> {
        let mut out = Vec::with_capacity(pair_count(texts.len()));
        for i in 0..texts.len() {
            for j in i + 1..texts.len() {
                let s = self
                    .score(texts[i], texts[j])
                    .map_err(|error| PairFailure { a: i, b: j, error })?;
                out.push(s);
            }
        }
        Ok(out)
    }
}

#[derive(Debug)]
pub struct PairFailure {
    pub a: usize,
    pub b: usize,
    pub error: Error,
}

pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

pub fn score_pair(a: &str, b: &str, scorer: &dyn SimilarityScorer) -> Result<f64> {
    scorer.score(a, b)
}

/// Cosine similarity clamped to `[-1, 1]`; `None` when either vector is zero.
///
/// `dot / sqrt(|u|^2 |v|^2)` is exactly 1 for `u == v`, since the square root
/// of a correctly rounded square is the original value.
pub fn cosine(u: &[f64], v: &[f64]) -> Option<f64> {
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (x, y) in u.iter().zip(v) {
        dot += x * y;
        nu += x * x;
        nv += y * y;
    }
    if nu == 0.0 || nv == 0.0 {
        return None;
    }
    if u == v {
        return Some(1.0);
    }
    Some((dot / (nu * nv).sqrt()).clamp(-1.0, 1.0))
}

/// Averaged-token-embedding cosine scorer.
#[derive(Debug, Clone)]
pub struct EmbeddingScorer {
    table: Arc<EmbeddingTable>,
}

impl EmbeddingScorer {
    pub fn new(table: impl Into<Arc<EmbeddingTable>>) -> Self {
        EmbeddingScorer {
            table: table.into(),
        }
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    fn cos(&self, ea: &[f64], eb: &[f64], a: &str, b: &str) -> Result<f64> {
        cosine(ea, eb).ok_or_else(|| {
            let zero = if ea.iter().all(|&x| x == 0.0) { a } else { b };
            Error::ZeroVector(snippet(zero))
        })
    }
}

impl SimilarityScorer for EmbeddingScorer {
    fn name(&self) -> &str {
        "avg-embedding-cosine"
    }

    fn score(&self, a: &str, b: &str) -> Result<f64> {
        let ea = self.table.embed(a)?;
        let eb = self.table.embed(b)?;
        self.cos(&ea, &eb, a, b)
    }

    /// Embeds each text once, lazily in pair order.
    fn score_pairs(&self, texts: &[&str]) -> Result<Vec<f64>, PairFailure> {
        let mut cache: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        let mut out = Vec::with_capacity(pair_count(texts.len()));
        for i in 0..texts.len() {
            for j in i + 1..texts.len() {
                let fail = |error| PairFailure { a: i, b: j, error };
                for k in [i, j] {
                    if cache[k].is_none() {
                        cache[k] = Some(self.table.embed(texts[k]).map_err(fail)?);
                    }
                }
                let (ea, eb) = (cache[i].as_deref().unwrap(), cache[j].as_deref().unwrap());
                out.push(self.cos(ea, eb, texts[i], texts[j]).map_err(fail)?);
            }
        }
        Ok(out)
    }
}
