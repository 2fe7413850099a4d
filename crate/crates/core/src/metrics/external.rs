use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{MeanScore, MetricAccumulator, MetricReport};
use crate::error::{Error, Result};

pub const EXTERNAL_CSV_HEADER: [&str; 3] = ["segment_id", "ref_id", "score"];

/// One externally computed score of a hypothesis against one reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalScoreRow {
    pub segment_id: String,
    pub ref_id: String,
    pub score: f64,
}

pub fn read_external_scores<R: Read>(input: R) -> Result<Vec<ExternalScoreRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(EXTERNAL_CSV_HEADER) {
        return Err(Error::parse(1, format!("expected header {}", EXTERNAL_CSV_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<ExternalScoreRow>().enumerate() {
        let row = rec.map_err(|e| Error::parse(i + 2, e.to_string()))?;
        if !row.score.is_finite() {
            return Err(Error::parse(i + 2, format!("non-finite score {}", row.score)));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Mean score per segment, in the order of `segment_ids`. Every segment
/// needs at least one row and no `(segment_id, ref_id)` may repeat.
pub fn segment_means(rows: &[ExternalScoreRow], segment_ids: &[&str]) -> Result<Vec<f64>> {
    let wanted: HashSet<&str> = segment_ids.iter().copied().collect();
    let mut seen = HashSet::new();
    let mut sums: HashMap<&str, (f64, usize)> = HashMap::new();
    for row in rows {
        if !wanted.contains(row.segment_id.as_str()) {
            return Err(Error::SegmentMismatch(format!("unknown segment `{}`", row.segment_id)));
        }
        if !seen.insert((row.segment_id.as_str(), row.ref_id.as_str())) {
            return Err(Error::DuplicateScore {
                segment_id: row.segment_id.clone(),
                ref_id: row.ref_id.clone(),
            });
        }
        let e = sums.entry(row.segment_id.as_str()).or_insert((0.0, 0));
        e.0 += row.score;
        e.1 += 1;
    }
    segment_ids
        .iter()
        .map(|id| {
            sums.get(id)
                .map(|&(s, n)| s / n as f64)
                .ok_or_else(|| Error::SegmentWithoutScores(id.to_string()))
        })
        .collect()
}

/// Averages reference-level scores into segment scores, then into corpus
/// and per-language means. `languages` maps every segment to its language.
pub fn average_external_scores(
    metric: &str,
    rows: &[ExternalScoreRow],
    languages: &BTreeMap<String, String>,
    keep_segments: bool,
) -> Result<MetricReport> {
    let ids: Vec<&str> = languages.keys().map(String::as_str).collect();
    let means = segment_means(rows, &ids)?;
    let agg = MeanScore::new(metric);
    let mut acc = MetricAccumulator::new(&agg, keep_segments);
    for ((id, lang), m) in languages.iter().zip(means) {
        acc.push_stats(id, lang, &[m]);
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(s: &str, r: &str, v: f64) -> ExternalScoreRow {
        ExternalScoreRow { segment_id: s.into(), ref_id: r.into(), score: v }
    }

    fn langs(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(s, l)| (s.to_string(), l.to_string())).collect()
    }

    #[test]
    fn averages_references_then_segments() {
        let rows = vec![row("s1", "r1", 0.8), row("s1", "r2", 0.6), row("s2", "r1", 0.4)];
        let r = average_external_scores(
            "comet",
            &rows,
            &langs(&[("s1", "fr"), ("s2", "sv")]),
            true,
        )
        .unwrap();
        assert!((r.corpus_score - 0.55).abs() < 1e-12);
        assert!((r.per_language["fr"].score - 0.7).abs() < 1e-12);
        assert_eq!(r.per_segment.unwrap().len(), 2);
    }

    #[test]
    fn rejects_bad_rows() {
        let l = langs(&[("s1", "fr"), ("s2", "fr")]);
        let dup = vec![row("s1", "r1", 0.8), row("s1", "r1", 0.6), row("s2", "r1", 0.4)];
        assert!(matches!(
            average_external_scores("m", &dup, &l, false),
            Err(Error::DuplicateScore { .. })
        ));
        let missing = vec![row("s1", "r1", 0.8)];
        assert!(matches!(
            average_external_scores("m", &missing, &l, false),
            Err(Error::SegmentWithoutScores(s)) if s == "s2"
        ));
        let unknown = vec![row("s1", "r1", 0.8), row("s2", "r1", 0.4), row("s9", "r1", 0.1)];
        assert!(average_external_scores("m", &unknown, &l, false).is_err());
    }

    #[test]
    fn csv_round() {
        let text = "segment_id,ref_id,score\ns1,r1,0.5\ns1,r2,-0.25\n";
        let rows = read_external_scores(text.as_bytes()).unwrap();
        assert_eq!(rows[1], row("s1", "r2", -0.25));
        assert!(read_external_scores("seg,ref,score\n".as_bytes()).is_err());
        assert!(read_external_scores("segment_id,ref_id,score\ns1,r1,abc\n".as_bytes()).is_err());
    }
}
