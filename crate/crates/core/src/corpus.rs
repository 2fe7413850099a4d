//! Corpus data model, line-delimited ingestion and instance accounting.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::word_count;

/// Default word limit applied to every reference of a group.
pub const DEFAULT_WORD_LIMIT: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceText {
    pub ref_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translator_id: Option<String>,
    pub text: String,
}

/// One source paragraph with all of its expert reference translations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParallelGroup {
    pub group_id: String,
    pub language: String,
    pub book_id: String,
    pub paragraph_index: u64,
    pub source_text: String,
    pub references: Vec<ReferenceText>,
}

impl ParallelGroup {
    pub fn validate(&self) -> Result<()> {
        let invalid = |message: String| Error::InvalidGroup {
            group_id: self.group_id.clone(),
            message,
        };
        if self.group_id.is_empty() {
            return Err(invalid("empty group_id".into()));
        }
        if self.references.is_empty() {
            return Err(invalid("empty reference list".into()));
        }
        let mut seen = HashSet::new();
        for r in &self.references {
            if r.text.trim().is_empty() {
                return Err(invalid(format!("reference `{}` has empty text", r.ref_id)));
            }
            if !seen.insert(r.ref_id.as_str()) {
                return Err(invalid(format!("duplicate ref_id `{}`", r.ref_id)));
            }
        }
        Ok(())
    }

    pub fn reference(&self, ref_id: &str) -> Option<&ReferenceText> {
        self.references.iter().find(|r| r.ref_id == ref_id)
    }

    pub fn is_multi_reference(&self) -> bool {
        self.references.len() >= 2
    }
}

/// Validated, ordered collection of groups. Iteration follows ingestion order.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    groups: Vec<ParallelGroup>,
    index: HashMap<String, usize>,
    pub metadata: BTreeMap<String, String>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.groups == other.groups && self.metadata == other.metadata
    }
}

impl Corpus {
    pub fn new(groups: Vec<ParallelGroup>) -> Result<Self> {
        let mut corpus = Corpus::default();
        for g in groups {
            corpus.push(g)?;
        }
        Ok(corpus)
    }

    /// Appends a group after validating it and checking id uniqueness.
    pub fn push(&mut self, group: ParallelGroup) -> Result<()> {
        group.validate()?;
        if self.index.contains_key(&group.group_id) {
            return Err(Error::DuplicateGroup(group.group_id));
        }
        self.index.insert(group.group_id.clone(), self.groups.len());
        self.groups.push(group);
        Ok(())
    }

    pub fn groups(&self) -> &[ParallelGroup] {
        &self.groups
    }

    pub fn get(&self, group_id: &str) -> Option<&ParallelGroup> {
        self.index.get(group_id).map(|&i| &self.groups[i])
    }

    pub fn position(&self, group_id: &str) -> Option<usize> {
        self.index.get(group_id).copied()
    }

    pub fn contains(&self, group_id: &str) -> bool {
        self.index.contains_key(group_id)
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ParallelGroup> {
        self.groups.iter()
    }

    /// Groups satisfying `keep`, as a new corpus. Order and metadata preserved.
    pub fn filtered(&self, mut keep: impl FnMut(&ParallelGroup) -> bool) -> Corpus {
        let groups: Vec<_> = self.groups.iter().filter(|g| keep(g)).cloned().collect();
        let index = groups
            .iter()
            .enumerate()
            .map(|(i, g)| (g.group_id.clone(), i))
            .collect();
        Corpus {
            groups,
            index,
            metadata: self.metadata.clone(),
        }
    }

    pub fn into_groups(self) -> Vec<ParallelGroup> {
        self.groups
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a ParallelGroup;
    type IntoIter = std::slice::Iter<'a, ParallelGroup>;

    fn into_iter(self) -> Self::IntoIter {
        self.groups.iter()
    }
}

/// How ingestion treats a bad record.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Validation {
    /// The first bad line aborts the load.
    #[default]
    Strict,
    /// Bad lines are skipped and reported.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadReport {
    pub corpus: Corpus,
    pub skipped: Vec<SkippedLine>,
}

/// Parses one record line. `line` is 1-based and only used for messages.
pub fn parse_group(text: &str, line: usize) -> Result<ParallelGroup> {
    let group: ParallelGroup =
        serde_json::from_str(text).map_err(|e| Error::parse(line, e.to_string()))?;
    group
        .validate()
        .map_err(|e| Error::parse(line, e.to_string()))?;
    Ok(group)
}

/// Streams validated groups from line-delimited records, skipping blank lines.
/// Items carry the 1-based line number. Duplicate ids are not detected here.
pub struct GroupReader<R> {
    input: R,
    line: usize,
    buf: String,
}

impl<R: BufRead> GroupReader<R> {
    pub fn new(input: R) -> Self {
        GroupReader {
            input,
            line: 0,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for GroupReader<R> {
    type Item = (usize, Result<ParallelGroup>);

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            self.line += 1;
            match self.input.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some((self.line, Err(Error::parse(self.line, e.to_string())))),
            }
            let text = self.buf.trim_end_matches(['\n', '\r']);
            if text.trim().is_empty() {
                continue;
            }
            return Some((self.line, parse_group(text, self.line)));
        }
    }
}

pub fn load_corpus<R: BufRead>(input: R, mode: Validation) -> Result<LoadReport> {
    let mut corpus = Corpus::default();
    let mut skipped = Vec::new();
    for (line, parsed) in GroupReader::new(input) {
        let pushed = parsed.and_then(|g| {
            corpus.push(g).map_err(|e| match e {
                Error::DuplicateGroup(_) => Error::parse(line, e.to_string()),
                other => other,
            })
        });
        match (pushed, mode) {
            (Ok(()), _) => {}
            (Err(e), Validation::Strict) => return Err(e),
            (Err(e), Validation::Lenient) => {
                tracing::warn!("skipping line {line}: {e}");
                skipped.push(SkippedLine {
                    line,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(LoadReport { corpus, skipped })
}

pub fn write_group<W: Write>(group: &ParallelGroup, mut out: W) -> Result<()> {
    serde_json::to_writer(&mut out, group)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Serializes the corpus in the record format, one group per line.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    for g in corpus {
        write_group(g, &mut out)?;
    }
    out.flush()?;
    Ok(())
}

/// Keeps the groups whose references all have fewer than `limit` words.
/// Source length is not constrained.
pub fn filter_by_word_limit(corpus: &Corpus, limit: usize) -> Result<Corpus> {
    if limit == 0 {
        return Err(Error::invalid("word limit must be at least 1"));
    }
    Ok(corpus.filtered(|g| g.references.iter().all(|r| word_count(&r.text) < limit)))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceCount {
    pub num_source: usize,
    pub num_instance: usize,
}

/// `#source` (distinct source paragraphs) and `#instance` (source-reference pairs).
pub trait CountInstances {
    fn count_instances(&self) -> InstanceCount;
}

impl CountInstances for [ParallelGroup] {
    fn count_instances(&self) -> InstanceCount {
        InstanceCount {
            num_source: self.len(),
            num_instance: self.iter().map(|g| g.references.len()).sum(),
        }
    }
}

impl CountInstances for Corpus {
    fn count_instances(&self) -> InstanceCount {
        self.groups.count_instances()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageStats {
    pub language: String,
    pub book_count: usize,
    pub source_count: usize,
    pub reference_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsTotals {
    pub book_count: usize,
    pub source_count: usize,
    pub reference_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub rows: Vec<LanguageStats>,
    pub totals: StatsTotals,
}

/// Per-language composition, rows sorted by source count ascending
/// (ties by language tag).
pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut acc: BTreeMap<&str, (BTreeSet<&str>, usize, usize)> = BTreeMap::new();
    for g in corpus {
        let e = acc.entry(g.language.as_str()).or_default();
        e.0.insert(g.book_id.as_str());
        e.1 += 1;
        e.2 += g.references.len();
    }
    let mut rows: Vec<LanguageStats> = acc
        .into_iter()
        .map(|(language, (books, sources, refs))| LanguageStats {
            language: language.to_string(),
            book_count: books.len(),
            source_count: sources,
            reference_count: refs,
        })
        .collect();
    rows.sort_by(|a, b| {
        a.source_count
            .cmp(&b.source_count)
            .then_with(|| a.language.cmp(&b.language))
    });
    let totals = rows.iter().fold(StatsTotals::default(), |mut t, r| {
        t.book_count += r.book_count;
        t.source_count += r.source_count;
        t.reference_count += r.reference_count;
        t
    });
    CorpusStats { rows, totals }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    const LINE: &str = r#"{"group_id":"g1","language":"fr","book_id":"b1","paragraph_index":3,"source_text":"Bonjour.","references":[{"ref_id":"r1","translator_id":"t1","text":"Hello."},{"ref_id":"r2","text":"Good day."}]}"#;

    #[test]
    fn loads_minimal_line() {
        let report = load_corpus(LINE.as_bytes(), Validation::Strict).unwrap();
        assert_eq!(report.corpus.len(), 1);
        let g = &report.corpus.groups()[0];
        assert_eq!(g.references.len(), 2);
        assert_eq!(g.references[0].translator_id.as_deref(), Some("t1"));
        assert_eq!(g.references[1].translator_id, None);
    }

    #[test]
    fn missing_field_names_line_and_field() {
        let bad = LINE.replace(r#""source_text":"Bonjour.","#, "");
        let input = format!("\n{bad}\n");
        let err = load_corpus(input.as_bytes(), Validation::Strict).unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("line 2:"), "{msg}");
        assert!(msg.contains("source_text"), "{msg}");
    }

    #[test]
    fn duplicate_group_is_error_in_strict_mode() {
        let input = format!("{LINE}\n{LINE}\n");
        let err = load_corpus(input.as_bytes(), Validation::Strict).unwrap_err();
        assert!(err.to_string().contains("duplicate group_id `g1`"), "{err}");
        assert!(err.to_string().starts_with("line 2"), "{err}");
    }

    #[test]
    fn lenient_mode_counts_skips() {
        let input = format!("{LINE}\nnot json\n{LINE}\n");
        let report = load_corpus(input.as_bytes(), Validation::Lenient).unwrap();
        assert_eq!(report.corpus.len(), 1);
        let lines: Vec<_> = report.skipped.iter().map(|s| s.line).collect();
        assert_eq!(lines, vec![2, 3]);
    }

    #[test]
    fn empty_reference_list_rejected() {
        let bad = LINE.replace(
            r#"[{"ref_id":"r1","translator_id":"t1","text":"Hello."},{"ref_id":"r2","text":"Good day."}]"#,
            "[]",
        );
        let err = load_corpus(bad.as_bytes(), Validation::Strict).unwrap_err();
        assert!(err.to_string().contains("empty reference list"), "{err}");
    }

    #[test]
    fn blank_reference_and_duplicate_ref_id_rejected() {
        let g = group("g", "fr", "b", &["a", "  "]);
        assert!(g.validate().is_err());
        let mut g = group("g", "fr", "b", &["a", "b"]);
        g.references[1].ref_id = "r1".into();
        assert!(g.validate().is_err());
    }

    #[test]
    fn word_limit_is_strict_and_applies_to_references_only() {
        let mut keep = group("keep", "fr", "b", &[&words(50), &words(127)]);
        keep.source_text = words(500);
        let drop = group("drop", "fr", "b", &[&words(50), &words(128)]);
        let corpus = Corpus::new(vec![keep, drop]).unwrap();
        let out = filter_by_word_limit(&corpus, 128).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.groups()[0].group_id, "keep");
        assert!(filter_by_word_limit(&corpus, 0).is_err());
    }

    #[test]
    fn word_limit_preserves_order() {
        // word counts: a=[3,4], b=[200], c=[1,1,1]; limit 10 drops b
        let corpus = Corpus::new(vec![
            group("a", "fr", "b", &[&words(3), &words(4)]),
            group("b", "fr", "b", &[&words(200)]),
            group("c", "fr", "b", &["x", "y", "z"]),
        ])
        .unwrap();
        let out = filter_by_word_limit(&corpus, 10).unwrap();
        let ids: Vec<_> = out.iter().map(|g| g.group_id.as_str()).collect();
        assert_eq!(ids, vec!["a", "c"]);
    }

    #[test]
    fn instance_counts() {
        let three_by_three = Corpus::new(
            (0..3)
                .map(|i| group(&format!("g{i}"), "fr", "b", &["a", "b", "c"]))
                .collect(),
        )
        .unwrap();
        assert_eq!(
            three_by_three.count_instances(),
            InstanceCount { num_source: 3, num_instance: 9 }
        );
        assert_eq!(Corpus::default().count_instances(), InstanceCount::default());
        let mixed = Corpus::new(vec![
            group("a", "fr", "b", &["1", "2"]),
            group("b", "fr", "b", &["1", "2", "3"]),
            group("c", "fr", "b", &["1", "2", "3", "4"]),
        ])
        .unwrap();
        assert_eq!(mixed.count_instances().num_instance, 9);
    }

    #[test]
    fn stats_sorted_by_source_count() {
        let mut groups = Vec::new();
        for i in 0..10 {
            groups.push(group(&format!("fr{i}"), "fr", if i < 5 { "b1" } else { "b2" }, &["a", "b"]));
        }
        for i in 0..4 {
            groups.push(group(&format!("sv{i}"), "sv", "s1", &["a"]));
        }
        let stats = corpus_stats(&Corpus::new(groups).unwrap());
        assert_eq!(stats.rows.len(), 2);
        assert_eq!(stats.rows[0].language, "sv");
        assert_eq!((stats.rows[0].book_count, stats.rows[0].source_count), (1, 4));
        assert_eq!((stats.rows[1].book_count, stats.rows[1].source_count), (2, 10));
        assert_eq!(stats.totals.source_count, 14);
        assert_eq!(stats.totals.reference_count, 24);

        assert_eq!(corpus_stats(&Corpus::default()), CorpusStats::default());
        let single = corpus_stats(&Corpus::new(vec![group("g", "de", "b", &["x"])]).unwrap());
        assert_eq!((single.rows[0].book_count, single.rows[0].source_count), (1, 1));
    }

    fn arb_group(id: usize) -> impl Strategy<Value = ParallelGroup> {
        (
            prop::sample::select(vec!["fr", "ru", "zh-classical"]),
            0u64..50,
            "[a-z ]{0,20}",
            prop::collection::vec(("[a-z]{1,5}( [a-z]{1,5}){0,150}", prop::option::of("[a-z]{1,4}")), 1..4),
        )
            .prop_map(move |(lang, para, source, refs)| ParallelGroup {
                group_id: format!("g{id}"),
                language: lang.to_string(),
                book_id: format!("book{}", para % 3),
                paragraph_index: para,
                source_text: source,
                references: refs
                    .into_iter()
                    .enumerate()
                    .map(|(i, (text, translator_id))| ReferenceText {
                        ref_id: format!("r{i}"),
                        translator_id,
                        text,
                    })
                    .collect(),
            })
    }

    fn arb_corpus() -> impl Strategy<Value = Corpus> {
        (0usize..8)
            .prop_flat_map(|n| (0..n).map(arb_group).collect::<Vec<_>>())
            .prop_map(|groups| Corpus::new(groups).unwrap())
    }

    proptest! {
        #[test]
        fn round_trip(corpus in arb_corpus()) {
            let mut buf = Vec::new();
            write_corpus(&corpus, &mut buf).unwrap();
            let back = load_corpus(buf.as_slice(), Validation::Strict).unwrap();
            prop_assert_eq!(back.corpus, corpus);
        }

        #[test]
        fn word_filter_idempotent(corpus in arb_corpus(), limit in 1usize..160) {
            let once = filter_by_word_limit(&corpus, limit).unwrap();
            let twice = filter_by_word_limit(&once, limit).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn counts_consistent(corpus in arb_corpus()) {
            let c = corpus.count_instances();
            prop_assert!(c.num_instance >= c.num_source);
            let all_single = corpus.iter().all(|g| g.references.len() == 1);
            prop_assert_eq!(c.num_instance == c.num_source, all_single);
            let stats = corpus_stats(&corpus);
            prop_assert_eq!(stats.totals.source_count, c.num_source);
            prop_assert_eq!(stats.totals.reference_count, c.num_instance);
        }
    }
}
