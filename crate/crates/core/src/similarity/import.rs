//! Externally computed pairwise scores (`group_id,ref_id_a,ref_id_b,score`).

use std::collections::{HashMap, HashSet};
use std::io::Read;

use serde::Deserialize;

use super::bins::Thresholds;
use super::scored::{PairScore, ScoredGroup};
use super::scorer::pair_count;
use crate::corpus::{Corpus, ParallelGroup};
use crate::error::{Error, Result};

pub const SCORE_CSV_HEADER: [&str; 4] = ["group_id", "ref_id_a", "ref_id_b", "score"];

#[derive(Debug, Deserialize)]
struct Row {
    group_id: String,
    ref_id_a: String,
    ref_id_b: String,
    score: f64,
}

/// Imported pairwise scores grouped by group id, in file order.
#[derive(Debug, Clone, Default)]
pub struct ImportedScores {
    by_group: HashMap<String, Vec<PairScore>>,
    order: Vec<String>,
}

pub fn import_scores<R: Read>(input: R) -> Result<ImportedScores> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(SCORE_CSV_HEADER) {
        return Err(Error::parse(
            1,
            format!("expected header `{}`", SCORE_CSV_HEADER.join(",")),
        ));
    }
    let mut out = ImportedScores::default();
    let mut seen: HashSet<(String, String, String)> = HashSet::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(line, e.to_string()))?;
        if !(-1.0..=1.0).contains(&row.score) {
            return Err(Error::parse(line, Error::ScoreOutOfRange(row.score).to_string()));
        }
        if row.ref_id_a == row.ref_id_b {
            return Err(Error::parse(line, format!("self pair `{}`", row.ref_id_a)));
        }
        let (a, b) = if row.ref_id_a <= row.ref_id_b {
            (row.ref_id_a.clone(), row.ref_id_b.clone())
        } else {
            (row.ref_id_b.clone(), row.ref_id_a.clone())
        };
        if !seen.insert((row.group_id.clone(), a, b)) {
            return Err(Error::parse(
                line,
                format!(
                    "duplicate pair ({}, {}) for group `{}`",
                    row.ref_id_a, row.ref_id_b, row.group_id
                ),
            ));
        }
        if !out.by_group.contains_key(&row.group_id) {
            out.order.push(row.group_id.clone());
        }
        out.by_group.entry(row.group_id).or_default().push(PairScore {
            ref_id_a: row.ref_id_a,
            ref_id_b: row.ref_id_b,
            score: row.score,
        });
    }
    Ok(out)
}

impl ImportedScores {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn group_ids(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    pub fn pairs(&self, group_id: &str) -> Option<&[PairScore]> {
        self.by_group.get(group_id).map(Vec::as_slice)
    }

    /// Imported group ids absent from `corpus`, in file order.
    pub fn unknown_groups(&self, corpus: &Corpus) -> Vec<&str> {
        self.group_ids().filter(|g| !corpus.contains(g)).collect()
    }

    /// Errors on the first unknown group when `strict`, otherwise warns.
    pub fn check_known(&self, corpus: &Corpus, strict: bool) -> Result<()> {
        let unknown = self.unknown_groups(corpus);
        match unknown.first() {
            Some(first) if strict => Err(Error::UnknownGroup(first.to_string())),
            Some(_) => {
                tracing::warn!("{} imported groups not in corpus, skipped", unknown.len());
                Ok(())
            }
            None => Ok(()),
        }
    }

    /// The group's scored record built only from imported pairs, re-ordered to
    /// follow the group's reference order. `None` if the group was not imported.
    pub fn scored_group(
        &self,
        group: &ParallelGroup,
        thresholds: &Thresholds,
    ) -> Option<Result<ScoredGroup>> {
        let pairs = self.by_group.get(&group.group_id)?;
        Some(complete_pairs(group, pairs).and_then(|p| {
            ScoredGroup::from_pairwise(group.group_id.clone(), p, thresholds)
        }))
    }
}

fn complete_pairs(group: &ParallelGroup, pairs: &[PairScore]) -> Result<Vec<PairScore>> {
    let incomplete = |message: String| Error::IncompletePairSet {
        group_id: group.group_id.clone(),
        message,
    };
    let position: HashMap<&str, usize> = group
        .references
        .iter()
        .enumerate()
        .map(|(i, r)| (r.ref_id.as_str(), i))
        .collect();
    let n = group.references.len();
    let mut grid: Vec<Option<f64>> = vec![None; n * n];
    for p in pairs {
        let (Some(&i), Some(&j)) = (
            position.get(p.ref_id_a.as_str()),
            position.get(p.ref_id_b.as_str()),
        ) else {
            return Err(incomplete(format!(
                "pair ({}, {}) names an unknown ref_id",
                p.ref_id_a, p.ref_id_b
            )));
        };
        let (i, j) = (i.min(j), i.max(j));
        grid[i * n + j] = Some(p.score);
    }
    let mut out = Vec::with_capacity(pair_count(n));
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&group.references[i].ref_id, &group.references[j].ref_id);
            let score = grid[i * n + j].ok_or_else(|| incomplete(format!("missing pair ({a}, {b})")))?;
            out.push(PairScore {
                ref_id_a: a.clone(),
                ref_id_b: b.clone(),
                score,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::group;
    use crate::similarity::{GroupScorer, SimilarityBin};

    const CSV: &str = "group_id,ref_id_a,ref_id_b,score\ng1,r1,r2,0.5\ng1,r1,r3,0.7\ng1,r2,r3,0.9\n";

    #[test]
    fn mean_of_imported_pairs() {
        let imported = import_scores(CSV.as_bytes()).unwrap();
        let g = group("g1", "fr", "b", &["a", "b", "c"]);
        let scored = imported.scored_group(&g, &Thresholds::default()).unwrap().unwrap();
        assert!((scored.sim_p - 0.7).abs() < 1e-12);
        assert_eq!(scored.bin, SimilarityBin::Medium);
    }

    #[test]
    fn pair_order_and_orientation_normalized() {
        let csv = "group_id,ref_id_a,ref_id_b,score\ng1,r3,r2,0.9\ng1,r2,r1,0.5\ng1,r1,r3,0.7\n";
        let imported = import_scores(csv.as_bytes()).unwrap();
        let g = group("g1", "fr", "b", &["a", "b", "c"]);
        let scored = imported.scored_group(&g, &Thresholds::default()).unwrap().unwrap();
        let got: Vec<_> = scored
            .pairwise
            .iter()
            .map(|p| (p.ref_id_a.as_str(), p.ref_id_b.as_str(), p.score))
            .collect();
        assert_eq!(got, vec![("r1", "r2", 0.5), ("r1", "r3", 0.7), ("r2", "r3", 0.9)]);
    }

    #[test]
    fn out_of_range_score_rejected() {
        let csv = "group_id,ref_id_a,ref_id_b,score\ng1,r1,r2,1.3\n";
        let err = import_scores(csv.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("outside [-1, 1]"), "{err}");
    }

    #[test]
    fn malformed_rows_rejected() {
        assert!(import_scores("a,b,c,d\n".as_bytes()).is_err());
        let dup = "group_id,ref_id_a,ref_id_b,score\ng1,r1,r2,0.1\ng1,r2,r1,0.2\n";
        assert!(import_scores(dup.as_bytes()).is_err());
        let nan = "group_id,ref_id_a,ref_id_b,score\ng1,r1,r2,abc\n";
        assert!(import_scores(nan.as_bytes()).is_err());
    }

    #[test]
    fn missing_pair_is_incomplete() {
        let csv = "group_id,ref_id_a,ref_id_b,score\ng1,r1,r2,0.5\ng1,r1,r3,0.7\n";
        let imported = import_scores(csv.as_bytes()).unwrap();
        let g = group("g1", "fr", "b", &["a", "b", "c"]);
        let err = imported.scored_group(&g, &Thresholds::default()).unwrap().unwrap_err();
        assert!(matches!(err, Error::IncompletePairSet { .. }), "{err}");
        assert!(err.to_string().contains("(r2, r3)"));

        // strict scoring refuses, lenient falls back to nothing -> MissingScore
        let gs = GroupScorer {
            scorer: None,
            imported: Some(&imported),
            thresholds: Thresholds::default(),
            strict_import: false,
        };
        assert!(gs.score_group(&g).is_err());
    }

    #[test]
    fn unknown_groups() {
        let imported = import_scores(CSV.as_bytes()).unwrap();
        let corpus = Corpus::new(vec![group("g2", "fr", "b", &["a", "b"])]).unwrap();
        assert_eq!(imported.unknown_groups(&corpus), vec!["g1"]);
        assert!(matches!(imported.check_known(&corpus, true), Err(Error::UnknownGroup(_))));
        assert!(imported.check_known(&corpus, false).is_ok());
    }
}
