use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::bleu::ngram_counts;
use super::{evaluate, Aggregate, CorpusMetric, MetricReport, SegmentEval};
use crate::error::{Error, Result};
use crate::text::metric_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChrfConfig {
    pub char_order: usize,
    pub word_order: usize,
    pub beta: f64,
}

impl Default for ChrfConfig {
    fn default() -> Self {
        ChrfConfig {
            char_order: 6,
            word_order: 2,
            beta: 2.0,
        }
    }
}

/// chrF++: character n-grams (whitespace removed) plus word n-grams.
///
/// Each order contributes an F-beta; orders where neither side has any
/// n-grams are skipped, the rest are averaged. A segment takes its best
/// reference and the corpus score is the mean over segments, times 100.
#[derive(Debug, Clone)]
pub struct Chrf {
    config: ChrfConfig,
}

impl Chrf {
    pub fn new(config: ChrfConfig) -> Result<Self> {
        if config.char_order + config.word_order == 0 {
            return Err(Error::invalid("chrF++ needs at least one n-gram order"));
        }
        if !(config.beta.is_finite() && config.beta > 0.0) {
            return Err(Error::invalid(format!("chrF++ beta must be positive, got {}", config.beta)));
        }
        Ok(Chrf { config })
    }
}

struct Side {
    chars: Vec<char>,
    words: Vec<String>,
}

impl Side {
    fn new(text: &str) -> Self {
        Side {
            chars: text.chars().filter(|c| !c.is_whitespace()).collect(),
            words: metric_tokens(text, false),
        }
    }
}

fn f_beta<T: std::hash::Hash + Eq>(
    hyp: &HashMap<&[T], u32>,
    reference: &HashMap<&[T], u32>,
    beta2: f64,
) -> Option<f64> {
    let hyp_total: u32 = hyp.values().sum();
    let ref_total: u32 = reference.values().sum();
    if hyp_total == 0 && ref_total == 0 {
        return None;
    }
    let matches: u32 = hyp
        .iter()
        .map(|(g, &c)| c.min(reference.get(g).copied().unwrap_or(0)))
        .sum();
    let p = if hyp_total > 0 { f64::from(matches) / f64::from(hyp_total) } else { 0.0 };
    let r = if ref_total > 0 { f64::from(matches) / f64::from(ref_total) } else { 0.0 };
    if p + r == 0.0 {
        Some(0.0)
    } else {
        Some((1.0 + beta2) * p * r / (beta2 * p + r))
    }
}

/// Segment chrF++ in `[0, 1]` against the best of `references`.
pub fn chrfpp_segment(hypothesis: &str, references: &[String], config: &ChrfConfig) -> f64 {
    let beta2 = config.beta * config.beta;
    let hyp = Side::new(hypothesis);
    let hyp_chars: Vec<_> = (1..=config.char_order).map(|n| ngram_counts(&hyp.chars, n)).collect();
    let hyp_words: Vec<_> = (1..=config.word_order).map(|n| ngram_counts(&hyp.words, n)).collect();

    references
        .iter()
        .map(|r| {
            let side = Side::new(r);
            let mut sum = 0.0;
            let mut orders = 0usize;
            for (n, h) in hyp_chars.iter().enumerate() {
                if let Some(f) = f_beta(h, &ngram_counts(&side.chars, n + 1), beta2) {
                    sum += f;
                    orders += 1;
                }
            }
            for (n, h) in hyp_words.iter().enumerate() {
                if let Some(f) = f_beta(h, &ngram_counts(&side.words, n + 1), beta2) {
                    sum += f;
                    orders += 1;
                }
            }
            if orders == 0 {
                0.0
            } else {
                sum / orders as f64
            }
        })
        .fold(0.0, f64::max)
}

impl Aggregate for Chrf {
    fn name(&self) -> &str {
        "chrf++"
    }

    fn width(&self) -> usize {
        1
    }

    fn score(&self, totals: &[f64], segments: usize) -> f64 {
        if segments == 0 {
            0.0
        } else {
            100.0 * totals[0] / segments as f64
        }
    }
}

impl CorpusMetric for Chrf {
    fn segment_stats(&self, segment: &SegmentEval) -> Vec<f64> {
        vec![chrfpp_segment(&segment.hypothesis, &segment.references, &self.config)]
    }
}

pub fn chrfpp_corpus(segments: &[SegmentEval], config: &ChrfConfig) -> Result<MetricReport> {
    evaluate(&Chrf::new(*config)?, segments, false)
}
