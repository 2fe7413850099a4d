use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bins::{assign_bin, HighSubcategory, SimilarityBin, Thresholds};
use super::import::ImportedScores;
use super::scorer::SimilarityScorer;
use crate::corpus::{GroupReader, ParallelGroup};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairScore {
    pub ref_id_a: String,
    pub ref_id_b: String,
    pub score: f64,
}

/// A group's pairwise reference similarities, their mean and its bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoredGroup {
    pub group_id: String,
    pub sim_p: f64,
    pub bin: SimilarityBin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high_subcategory: Option<HighSubcategory>,
    pub pairwise: Vec<PairScore>,
}

impl ScoredGroup {
    /// Computes sim_p as the arithmetic mean of `pairwise` and bins it.
    pub fn from_pairwise(
        group_id: impl Into<String>,
        pairwise: Vec<PairScore>,
        thresholds: &Thresholds,
    ) -> Result<Self> {
        let group_id = group_id.into();
        if pairwise.is_empty() {
            return Err(Error::FewerThanTwoReferences { group_id, count: 1 });
        }
        if let Some(p) = pairwise.iter().find(|p| !(-1.0..=1.0).contains(&p.score)) {
            return Err(Error::ScoreOutOfRange(p.score));
        }
        let sum: f64 = pairwise.iter().map(|p| p.score).sum();
        let sim_p = (sum / pairwise.len() as f64).clamp(-1.0, 1.0);
        let b = assign_bin(sim_p, thresholds)?;
        Ok(ScoredGroup {
            group_id,
            sim_p,
            bin: b.bin,
            high_subcategory: b.high_subcategory,
            pairwise,
        })
    }

    /// Reassigns the bin under different thresholds.
    pub fn rebin(&mut self, thresholds: &Thresholds) -> Result<()> {
        let b = assign_bin(self.sim_p, thresholds)?;
        self.bin = b.bin;
        self.high_subcategory = b.high_subcategory;
        Ok(())
    }
}

/// Mean pairwise similarity of a group's references.
pub fn sim_p(
    group: &ParallelGroup,
    scorer: &dyn SimilarityScorer,
    thresholds: &Thresholds,
) -> Result<ScoredGroup> {
    let refs = &group.references;
    if refs.len() < 2 {
        return Err(Error::FewerThanTwoReferences {
            group_id: group.group_id.clone(),
            count: refs.len(),
        });
    }
    let texts: Vec<&str> = refs.iter().map(|r| r.text.as_str()).collect();
    let scores = scorer.score_pairs(&texts).map_err(|f| Error::PairScoring {
        group_id: group.group_id.clone(),
        ref_a: refs[f.a].ref_id.clone(),
        ref_b: refs[f.b].ref_id.clone(),
        source: Box::new(f.error),
    })?;
    let mut pairwise = Vec::with_capacity(scores.len());
    let mut k = 0;
    for i in 0..refs.len() {
        for j in i + 1..refs.len() {
            pairwise.push(PairScore {
                ref_id_a: refs[i].ref_id.clone(),
                ref_id_b: refs[j].ref_id.clone(),
                score: scores[k],
            });
            k += 1;
        }
    }
    ScoredGroup::from_pairwise(group.group_id.clone(), pairwise, thresholds)
}

/// Scored groups in corpus order, indexed by group id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    groups: Vec<ScoredGroup>,
    index: HashMap<String, usize>,
}

impl ScoreTable {
    pub fn new(groups: Vec<ScoredGroup>) -> Result<Self> {
        let mut t = ScoreTable::default();
        for g in groups {
            t.push(g)?;
        }
        Ok(t)
    }

    pub fn push(&mut self, group: ScoredGroup) -> Result<()> {
        if self.index.contains_key(&group.group_id) {
            return Err(Error::DuplicateGroup(group.group_id));
        }
        self.index.insert(group.group_id.clone(), self.groups.len());
        self.groups.push(group);
        Ok(())
    }

    pub fn get(&self, group_id: &str) -> Option<&ScoredGroup> {
        self.index.get(group_id).map(|&i| &self.groups[i])
    }

    pub fn bin_of(&self, group_id: &str) -> Option<SimilarityBin> {
        self.get(group_id).map(|g| g.bin)
    }

    pub fn groups(&self) -> &[ScoredGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ScoredGroup> {
        self.groups.iter()
    }

    pub fn rebin(&mut self, thresholds: &Thresholds) -> Result<()> {
        self.groups.iter_mut().try_for_each(|g| g.rebin(thresholds))
    }
}

pub fn read_scored<R: BufRead>(input: R) -> Result<ScoreTable> {
    let mut table = ScoreTable::default();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let g: ScoredGroup =
            serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        table.push(g).map_err(|e| Error::parse(i + 1, e.to_string()))?;
    }
    Ok(table)
}

pub fn write_scored_group<W: Write>(group: &ScoredGroup, mut out: W) -> Result<()> {
    serde_json::to_writer(&mut out, group)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_scored<W: Write>(table: &ScoreTable, mut out: W) -> Result<()> {
    for g in table.iter() {
        write_scored_group(g, &mut out)?;
    }
    out.flush()?;
    Ok(())
}

/// Combines the built-in scorer with imported scores. A group found in the
/// import is scored only from the import, never from both sources.
pub struct GroupScorer<'a> {
    pub scorer: Option<&'a dyn SimilarityScorer>,
    pub imported: Option<&'a ImportedScores>,
    pub thresholds: Thresholds,
    /// Reject incomplete imported pair sets instead of falling back.
    pub strict_import: bool,
}

impl<'a> GroupScorer<'a> {
    pub fn builtin(scorer: &'a dyn SimilarityScorer, thresholds: Thresholds) -> Self {
        GroupScorer {
            scorer: Some(scorer),
            imported: None,
            thresholds,
            strict_import: true,
        }
    }

    /// `Ok(None)` for single-reference groups, which have no similarity.
    pub fn score_group(&self, group: &ParallelGroup) -> Result<Option<ScoredGroup>> {
        if !group.is_multi_reference() {
            return Ok(None);
        }
        if let Some(imported) = self.imported {
            match imported.scored_group(group, &self.thresholds) {
                None => {}
                Some(Ok(g)) => return Ok(Some(g)),
                Some(Err(e)) if self.strict_import || self.scorer.is_none() => return Err(e),
                Some(Err(e)) => {
                    tracing::warn!("ignoring imported scores: {e}");
                }
            }
        }
        match self.scorer {
            Some(s) => sim_p(group, s, &self.thresholds).map(Some),
            None => Err(Error::MissingScore(group.group_id.clone())),
        }
    }

    /// Scores all multi-reference groups in parallel; output follows input order
    /// and is identical for any thread count.
    pub fn score_all(&self, groups: &[ParallelGroup]) -> Result<ScoreTable> {
        let scored: Vec<Option<ScoredGroup>> = groups
            .par_iter()
            .map(|g| self.score_group(g))
            .collect::<Result<_>>()?;
        ScoreTable::new(scored.into_iter().flatten().collect())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StreamSummary {
    pub groups: usize,
    pub scored: usize,
    pub single_reference: usize,
}

/// Scores a line-delimited corpus chunk by chunk, writing scored records in
/// input order. Memory is bounded by `chunk` groups.
pub fn score_stream<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    scorer: &GroupScorer<'_>,
    chunk: usize,
) -> Result<StreamSummary> {
    let chunk = chunk.max(1);
    let mut summary = StreamSummary::default();
    let mut reader = GroupReader::new(input);
    let mut buf: Vec<ParallelGroup> = Vec::with_capacity(chunk);
    loop {
        buf.clear();
        for (_, g) in reader.by_ref().take(chunk) {
            buf.push(g?);
        }
        if buf.is_empty() {
            break;
        }
        let scored: Vec<Option<ScoredGroup>> = buf
            .par_iter()
            .map(|g| scorer.score_group(g))
            .collect::<Result<_>>()?;
        summary.groups += buf.len();
        for g in scored {
            match g {
                Some(g) => {
                    write_scored_group(&g, &mut output)?;
                    summary.scored += 1;
                }
                None => summary.single_reference += 1,
            }
        }
    }
    output.flush()?;
    Ok(summary)
}
