//! Multi-reference corpus metrics and per-language reporting.
//!
//! A metric reduces each segment to a fixed-width vector of additive
//! statistics; the corpus score is a function of their sum. The same
//! statistics drive bootstrap resampling without re-tokenizing anything.

mod bleu;
mod chrf;
mod external;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub use bleu::{bleu_corpus, Bleu, BleuBreakdown, BleuConfig};
pub use chrf::{chrfpp_corpus, chrfpp_segment, Chrf, ChrfConfig};
pub use external::{
    average_external_scores, read_external_scores, segment_means, ExternalScoreRow,
    EXTERNAL_CSV_HEADER,
};

/// One hypothesis with its references.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentEval {
    pub segment_id: String,
    pub language: String,
    pub hypothesis: String,
    pub references: Vec<String>,
}

/// A system output line: `{segment_id, language, hypothesis}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hypothesis {
    pub segment_id: String,
    pub language: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConfig {
    pub bleu: BleuConfig,
    pub chrfpp: ChrfConfig,
}

/// Turns summed statistics into a corpus score.
pub trait Aggregate: Sync {
    fn name(&self) -> &str;
    fn width(&self) -> usize;
    fn score(&self, totals: &[f64], segments: usize) -> f64;
}

pub trait CorpusMetric: Aggregate {
    /// Additive statistics for one segment, `width()` values long.
    fn segment_stats(&self, segment: &SegmentEval) -> Vec<f64>;
}

/// Mean of one precomputed score per segment.
#[derive(Debug, Clone)]
pub struct MeanScore {
    name: String,
}

impl MeanScore {
    pub fn new(name: impl Into<String>) -> Self {
        MeanScore { name: name.into() }
    }
}

impl Aggregate for MeanScore {
    fn name(&self) -> &str {
        &self.name
    }
    fn width(&self) -> usize {
        1
    }
    fn score(&self, totals: &[f64], segments: usize) -> f64 {
        if segments == 0 {
            0.0
        } else {
            totals[0] / segments as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageScore {
    pub score: f64,
    pub segments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentScore {
    pub segment_id: String,
    pub language: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub corpus_score: f64,
    pub segments: usize,
    pub per_language: BTreeMap<String, LanguageScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_segment: Option<Vec<SegmentScore>>,
}

/// Sums segment statistics overall and per language.
pub struct MetricAccumulator<'m> {
    metric: &'m dyn Aggregate,
    totals: Vec<f64>,
    count: usize,
    languages: BTreeMap<String, (Vec<f64>, usize)>,
    per_segment: Option<Vec<SegmentScore>>,
}

impl<'m> MetricAccumulator<'m> {
    pub fn new(metric: &'m dyn Aggregate, keep_segments: bool) -> Self {
        MetricAccumulator {
            metric,
            totals: vec![0.0; metric.width()],
            count: 0,
            languages: BTreeMap::new(),
            per_segment: keep_segments.then(Vec::new),
        }
    }

    pub fn push_stats(&mut self, segment_id: &str, language: &str, stats: &[f64]) {
        debug_assert_eq!(stats.len(), self.totals.len());
        add(&mut self.totals, stats);
        self.count += 1;
        let lang = self
            .languages
            .entry(language.to_string())
            .or_insert_with(|| (vec![0.0; stats.len()], 0));
        add(&mut lang.0, stats);
        lang.1 += 1;
        if let Some(per) = &mut self.per_segment {
            per.push(SegmentScore {
                segment_id: segment_id.to_string(),
                language: language.to_string(),
                score: self.metric.score(stats, 1),
            });
        }
    }

    pub fn finish(self) -> Result<MetricReport> {
        if self.count == 0 {
            return Err(Error::NoSegments);
        }
        let metric = self.metric;
        Ok(MetricReport {
            metric: metric.name().to_string(),
            corpus_score: metric.score(&self.totals, self.count),
            segments: self.count,
            per_language: self
                .languages
                .into_iter()
                .map(|(lang, (totals, n))| {
                    let score = metric.score(&totals, n);
                    (lang, LanguageScore { score, segments: n })
                })
                .collect(),
            per_segment: self.per_segment,
        })
    }
}

pub(crate) fn add(acc: &mut [f64], stats: &[f64]) {
    for (a, s) in acc.iter_mut().zip(stats) {
        *a += s;
    }
}

/// Scores `segments` with `metric`. Segment statistics are computed in
/// parallel and reduced in input order.
pub fn evaluate(
    metric: &dyn CorpusMetric,
    segments: &[SegmentEval],
    keep_segments: bool,
) -> Result<MetricReport> {
    let stats: Vec<Vec<f64>> = segments.par_iter().map(|s| metric.segment_stats(s)).collect();
    let mut acc = MetricAccumulator::new(metric, keep_segments);
    for (seg, st) in segments.iter().zip(&stats) {
        acc.push_stats(&seg.segment_id, &seg.language, st);
    }
    acc.finish()
}

fn segment_for(h: Hypothesis, refs: &Corpus) -> Result<SegmentEval> {
    let g = refs
        .get(&h.segment_id)
        .ok_or_else(|| Error::SegmentMismatch(format!("no references for `{}`", h.segment_id)))?;
    Ok(SegmentEval {
        segment_id: h.segment_id,
        language: g.language.clone(),
        hypothesis: h.hypothesis,
        references: g.references.iter().map(|r| r.text.clone()).collect(),
    })
}

/// Pairs hypotheses with reference groups by `segment_id == group_id`.
/// The two id sets must be identical. Output follows reference order.
pub fn join_segments(hypotheses: &[Hypothesis], refs: &Corpus) -> Result<Vec<SegmentEval>> {
    let mut by_id = std::collections::HashMap::new();
    for h in hypotheses {
        if by_id.insert(h.segment_id.as_str(), h).is_some() {
            return Err(Error::SegmentMismatch(format!(
                "duplicate hypothesis for `{}`",
                h.segment_id
            )));
        }
    }
    if let Some(h) = hypotheses.iter().find(|h| !refs.contains(&h.segment_id)) {
        return Err(Error::SegmentMismatch(format!("no references for `{}`", h.segment_id)));
    }
    refs.iter()
        .map(|g| {
            let h = by_id.get(g.group_id.as_str()).ok_or_else(|| {
                Error::SegmentMismatch(format!("no hypothesis for `{}`", g.group_id))
            })?;
            segment_for((*h).clone(), refs)
        })
        .collect()
}

pub fn read_hypotheses<R: BufRead>(input: R) -> Result<Vec<Hypothesis>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?);
    }
    Ok(out)
}

/// Streams hypotheses from `input` against in-memory references without
/// collecting them. Every reference group must receive exactly one hypothesis.
pub fn evaluate_stream<R: BufRead>(
    metric: &dyn CorpusMetric,
    input: R,
    refs: &Corpus,
    keep_segments: bool,
) -> Result<MetricReport> {
    let mut acc = MetricAccumulator::new(metric, keep_segments);
    let mut seen: HashSet<String> = HashSet::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let h: Hypothesis =
            serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if !seen.insert(h.segment_id.clone()) {
            return Err(Error::SegmentMismatch(format!(
                "duplicate hypothesis for `{}`",
                h.segment_id
            )));
        }
        let seg = segment_for(h, refs)?;
        acc.push_stats(&seg.segment_id, &seg.language, &metric.segment_stats(&seg));
    }
    if let Some(g) = refs.iter().find(|g| !seen.contains(&g.group_id)) {
        return Err(Error::SegmentMismatch(format!("no hypothesis for `{}`", g.group_id)));
    }
    acc.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub metric: String,
    pub overall: f64,
    pub per_language: BTreeMap<String, f64>,
}

/// `b - a`, overall and per language. Both reports must cover the same segments.
pub fn per_language_gain(a: &MetricReport, b: &MetricReport) -> Result<GainReport> {
    let langs_a: BTreeSet<&String> = a.per_language.keys().collect();
    let langs_b: BTreeSet<&String> = b.per_language.keys().collect();
    if langs_a != langs_b {
        let missing: Vec<_> = langs_a.symmetric_difference(&langs_b).collect();
        return Err(Error::SegmentMismatch(format!("languages differ: {missing:?}")));
    }
    if a.segments != b.segments {
        return Err(Error::SegmentMismatch(format!(
            "{} vs {} segments",
            a.segments, b.segments
        )));
    }
    for (lang, la) in &a.per_language {
        if la.segments != b.per_language[lang].segments {
            return Err(Error::SegmentMismatch(format!("segment counts differ for `{lang}`")));
        }
    }
    if let (Some(sa), Some(sb)) = (&a.per_segment, &b.per_segment) {
        let ids_a: BTreeSet<&str> = sa.iter().map(|s| s.segment_id.as_str()).collect();
        let ids_b: BTreeSet<&str> = sb.iter().map(|s| s.segment_id.as_str()).collect();
        if ids_a != ids_b {
            return Err(Error::SegmentMismatch("segment ids differ".into()));
        }
    }
    Ok(GainReport {
        metric: b.metric.clone(),
        overall: b.corpus_score - a.corpus_score,
        per_language: a
            .per_language
            .iter()
            .map(|(lang, la)| (lang.clone(), b.per_language[lang].score - la.score))
            .collect(),
    })
}

#[cfg(test)]
pub(crate) fn seg(id: &str, hyp: &str, refs: &[&str]) -> SegmentEval {
    SegmentEval {
        segment_id: id.into(),
        language: "fr".into(),
        hypothesis: hyp.into(),
        references: refs.iter().map(|r| r.to_string()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::group;

    fn report(langs: &[(&str, f64, usize)]) -> MetricReport {
        MetricReport {
            metric: "bleu".into(),
            corpus_score: langs.iter().map(|l| l.1).sum::<f64>() / langs.len() as f64,
            segments: langs.iter().map(|l| l.2).sum(),
            per_language: langs
                .iter()
                .map(|(l, s, n)| (l.to_string(), LanguageScore { score: *s, segments: *n }))
                .collect(),
            per_segment: None,
        }
    }

    #[test]
    fn gains() {
        let a = report(&[("fr", 40.0, 3), ("sv", 30.0, 2)]);
        let same = per_language_gain(&a, &a).unwrap();
        assert!(same.per_language.values().all(|&d| d == 0.0));
        assert_eq!(same.overall, 0.0);
        let b = report(&[("fr", 42.5, 3), ("sv", 30.0, 2)]);
        assert_eq!(per_language_gain(&a, &b).unwrap().per_language["fr"], 2.5);
        let c = report(&[("fr", 42.5, 3)]);
        assert!(matches!(per_language_gain(&a, &c), Err(Error::SegmentMismatch(_))));
    }

    #[test]
    fn join_requires_identical_sets() {
        let refs = Corpus::new(vec![
            group("s1", "fr", "b", &["a b"]),
            group("s2", "sv", "b", &["c", "d"]),
        ])
        .unwrap();
        let h = |id: &str| Hypothesis {
            segment_id: id.into(),
            language: "fr".into(),
            hypothesis: "x".into(),
        };
        let segs = join_segments(&[h("s2"), h("s1")], &refs).unwrap();
        assert_eq!(segs[0].segment_id, "s1");
        assert_eq!(segs[1].language, "sv");
        assert_eq!(segs[1].references, vec!["c", "d"]);
        assert!(join_segments(&[h("s1")], &refs).is_err());
        assert!(join_segments(&[h("s1"), h("s2"), h("s3")], &refs).is_err());
        assert!(join_segments(&[h("s1"), h("s1"), h("s2")], &refs).is_err());
    }

    #[test]
    fn stream_matches_batch_for_bleu() {
        let refs = Corpus::new(vec![
            group("s1", "fr", "b", &["the cat sat on the mat"]),
            group("s2", "sv", "b", &["a dog barked", "the dog barked loudly"]),
        ])
        .unwrap();
        let hyps = "{\"segment_id\":\"s1\",\"language\":\"fr\",\"hypothesis\":\"the cat sat on a mat\"}\n\
                    {\"segment_id\":\"s2\",\"language\":\"sv\",\"hypothesis\":\"the dog barked\"}\n";
        let bleu = Bleu::new(BleuConfig::default()).unwrap();
        let streamed = evaluate_stream(&bleu, hyps.as_bytes(), &refs, true).unwrap();
        let parsed = read_hypotheses(hyps.as_bytes()).unwrap();
        let batch = evaluate(&bleu, &join_segments(&parsed, &refs).unwrap(), true).unwrap();
        assert_eq!(streamed, batch);
        assert_eq!(streamed.per_language.len(), 2);
    }

    #[test]
    fn empty_evaluation_is_error() {
        let bleu = Bleu::new(BleuConfig::default()).unwrap();
        assert!(matches!(evaluate(&bleu, &[], false), Err(Error::NoSegments)));
    }
}
