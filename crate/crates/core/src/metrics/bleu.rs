use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::{evaluate, Aggregate, CorpusMetric, MetricReport, SegmentEval};
use crate::error::{Error, Result};
use crate::text::metric_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BleuConfig {
    pub max_order: usize,
    pub lowercase: bool,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig {
            max_order: 4,
            lowercase: false,
        }
    }
}

/// Corpus BLEU with max-over-references clipping and closest reference
/// length (ties to the shorter). No smoothing.
///
/// Statistics layout: `[hyp_len, ref_len, matches_1..N, totals_1..N]`.
#[derive(Debug, Clone)]
pub struct Bleu {
    config: BleuConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuBreakdown {
    pub score: f64,
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub hyp_len: f64,
    pub ref_len: f64,
}

pub(crate) fn ngram_counts<T: Hash + Eq>(items: &[T], n: usize) -> HashMap<&[T], u32> {
    let mut counts = HashMap::new();
    if n > 0 && items.len() >= n {
        for w in items.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

impl Bleu {
    pub fn new(config: BleuConfig) -> Result<Self> {
        if config.max_order == 0 {
            return Err(Error::invalid("BLEU max_order must be at least 1"));
        }
        Ok(Bleu { config })
    }

    pub fn breakdown(&self, totals: &[f64]) -> BleuBreakdown {
        let n = self.config.max_order;
        let (hyp_len, ref_len) = (totals[0], totals[1]);
        let precisions: Vec<f64> = (0..n)
            .map(|k| {
                let (m, t) = (totals[2 + k], totals[2 + n + k]);
                if t > 0.0 {
                    m / t
                } else {
                    0.0
                }
            })
            .collect();
        let brevity_penalty = if hyp_len <= 0.0 {
            0.0
        } else if hyp_len > ref_len {
            1.0
        } else {
            (1.0 - ref_len / hyp_len).exp()
        };
        let score = if precisions.contains(&0.0) || brevity_penalty == 0.0 {
            0.0
        } else {
            let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / n as f64;
            100.0 * brevity_penalty * log_mean.exp()
        };
        BleuBreakdown {
            score,
            precisions,
            brevity_penalty,
            hyp_len,
            ref_len,
        }
    }
}

impl Aggregate for Bleu {
    fn name(&self) -> &str {
        "bleu"
    }

    fn width(&self) -> usize {
        2 + 2 * self.config.max_order
    }

    fn score(&self, totals: &[f64], _segments: usize) -> f64 {
        self.breakdown(totals).score
    }
}

impl CorpusMetric for Bleu {
    fn segment_stats(&self, segment: &SegmentEval) -> Vec<f64> {
        let n = self.config.max_order;
        let lc = self.config.lowercase;
        let hyp = metric_tokens(&segment.hypothesis, lc);
        let refs: Vec<Vec<String>> = segment
            .references
            .iter()
            .map(|r| metric_tokens(r, lc))
            .collect();

        let c = hyp.len();
        let r = refs
            .iter()
            .map(Vec::len)
            .min_by_key(|&len| (len.abs_diff(c), len))
            .unwrap_or(0);

        let mut stats = vec![0.0; self.width()];
        stats[0] = c as f64;
        stats[1] = r as f64;
        for k in 1..=n {
            let hyp_counts = ngram_counts(&hyp, k);
            let mut max_ref: HashMap<&[String], u32> = HashMap::new();
            for rt in &refs {
                for (g, cnt) in ngram_counts(rt, k) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(cnt);
                }
            }
            let matches: u32 = hyp_counts
                .iter()
                .map(|(g, &cnt)| cnt.min(max_ref.get(g).copied().unwrap_or(0)))
                .sum();
            stats[1 + k] = f64::from(matches);
            stats[1 + n + k] = c.saturating_sub(k - 1) as f64;
        }
        stats
    }
}

pub fn bleu_corpus(segments: &[SegmentEval], config: &BleuConfig) -> Result<MetricReport> {
    evaluate(&Bleu::new(*config)?, segments, false)
}
