//! Book-disjoint, per-language train/val/test partitioning.
//!
//! For each language the books are shuffled, stably sorted by paragraph count
//! (largest first) and assigned to train first-fit while the train paragraph
//! count stays within `train_fraction` of the language total. The remaining
//! books form the held-out pool, which is shuffled at paragraph level and cut
//! into val and test. Test keeps only Medium-bin multi-reference groups; the
//! rest of its share moves to val.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, ParallelGroup};
use crate::error::{Error, Result};
use crate::rng;
use crate::similarity::{ScoreTable, SimilarityBin};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    /// Share of the held-out pool that goes to val.
    pub val_test_ratio: f64,
    pub seed: u64,
    pub ratio_tolerance: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            val_test_ratio: 0.5,
            seed: 0,
            ratio_tolerance: 0.05,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let open = |x: f64| x > 0.0 && x < 1.0;
        if !open(self.train_fraction) || !open(self.val_test_ratio) {
            return Err(Error::invalid(
                "train_fraction and val_test_ratio must lie in (0, 1)",
            ));
        }
        if self.ratio_tolerance.is_nan() || self.ratio_tolerance < 0.0 {
            return Err(Error::invalid("ratio_tolerance must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BookPartition {
    Train,
    Heldout,
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    pub train: Corpus,
    pub val: Corpus,
    pub test: Corpus,
    /// Achieved train fraction per language, by group count.
    pub per_language_ratios: BTreeMap<String, f64>,
    pub book_assignment: BTreeMap<String, BookPartition>,
    pub warnings: Vec<String>,
}

/// Whether a group may be placed in the test partition.
pub fn test_eligible(group: &ParallelGroup, scores: &ScoreTable) -> bool {
    group.is_multi_reference() && scores.bin_of(&group.group_id) == Some(SimilarityBin::Medium)
}

struct LanguagePlan<'a> {
    language: &'a str,
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
    books: Vec<(&'a str, BookPartition)>,
    warning: Option<String>,
}

pub fn split(corpus: &Corpus, scores: &ScoreTable, spec: &SplitSpec) -> Result<SplitResult> {
    spec.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if let Some(g) = corpus
        .iter()
        .find(|g| g.is_multi_reference() && scores.get(&g.group_id).is_none())
    {
        return Err(Error::MissingScore(g.group_id.clone()));
    }

    // language -> book -> group positions, books in first-appearance order
    let mut languages: BTreeMap<&str, Vec<(&str, Vec<usize>)>> = BTreeMap::new();
    let mut book_language: HashMap<&str, &str> = HashMap::new();
    for (pos, g) in corpus.iter().enumerate() {
        match book_language.insert(&g.book_id, &g.language) {
            Some(prev) if prev != g.language => {
                return Err(Error::InvalidGroup {
                    group_id: g.group_id.clone(),
                    message: format!(
                        "book `{}` appears under languages `{prev}` and `{}`",
                        g.book_id, g.language
                    ),
                });
            }
            _ => {}
        }
        let books = languages.entry(&g.language).or_default();
        match books.iter_mut().find(|(b, _)| *b == g.book_id) {
            Some((_, groups)) => groups.push(pos),
            None => books.push((&g.book_id, vec![pos])),
        }
    }

    let plans: Vec<LanguagePlan> = languages
        .into_par_iter()
        .map(|(language, books)| plan_language(corpus, scores, spec, language, books))
        .collect();

    let mut assignment = vec![0u8; corpus.len()];
    let mut result = SplitResult {
        train: Corpus::default(),
        val: Corpus::default(),
        test: Corpus::default(),
        per_language_ratios: BTreeMap::new(),
        book_assignment: BTreeMap::new(),
        warnings: Vec::new(),
    };
    for plan in plans {
        for &p in &plan.val {
            assignment[p] = 1;
        }
        for &p in &plan.test {
            assignment[p] = 2;
        }
        let total = plan.train.len() + plan.val.len() + plan.test.len();
        result.per_language_ratios.insert(
            plan.language.to_string(),
            plan.train.len() as f64 / total as f64,
        );
        for (book, part) in plan.books {
            result.book_assignment.insert(book.to_string(), part);
        }
        if let Some(w) = plan.warning {
            tracing::warn!("{w}");
            result.warnings.push(w);
        }
    }
    for (g, part) in corpus.iter().zip(&assignment) {
        let target = match part {
            0 => &mut result.train,
            1 => &mut result.val,
            _ => &mut result.test,
        };
        target.push(g.clone())?;
    }
    result.train.metadata = corpus.metadata.clone();
    result.val.metadata = corpus.metadata.clone();
    result.test.metadata = corpus.metadata.clone();
    Ok(result)
}

fn plan_language<'a>(
    corpus: &Corpus,
    scores: &ScoreTable,
    spec: &SplitSpec,
    language: &'a str,
    mut books: Vec<(&'a str, Vec<usize>)>,
) -> LanguagePlan<'a> {
    let mut plan = LanguagePlan {
        language,
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        books: Vec::new(),
        warning: None,
    };
    if books.len() < 2 {
        plan.warning = Some(format!(
            "language `{language}` has {} book(s); all of it goes to train",
            books.len()
        ));
        for (book, groups) in books {
            plan.train.extend(groups);
            plan.books.push((book, BookPartition::Train));
        }
        return plan;
    }

    books.shuffle(&mut rng::labeled(spec.seed, &format!("split/books/{language}")));
    books.sort_by_key(|(_, groups)| std::cmp::Reverse(groups.len()));
    let total: usize = books.iter().map(|(_, g)| g.len()).sum();
    let budget = spec.train_fraction * total as f64 + 1e-9;
    let mut heldout = Vec::new();
    let mut in_train = 0usize;
    for (book, groups) in books {
        if (in_train + groups.len()) as f64 <= budget {
            in_train += groups.len();
            plan.train.extend(groups);
            plan.books.push((book, BookPartition::Train));
        } else {
            heldout.extend(groups);
            plan.books.push((book, BookPartition::Heldout));
        }
    }
    plan.train.sort_unstable();

    heldout.sort_unstable();
    heldout.shuffle(&mut rng::labeled(spec.seed, &format!("split/heldout/{language}")));
    let n_val = (heldout.len() as f64 * spec.val_test_ratio).round() as usize;
    let test_share = heldout.split_off(n_val.min(heldout.len()));
    plan.val = heldout;
    for p in test_share {
        if test_eligible(&corpus.groups()[p], scores) {
            plan.test.push(p);
        } else {
            plan.val.push(p);
        }
    }
    plan.val.sort_unstable();
    plan.test.sort_unstable();
    plan
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitViolation {
    MissingGroup { group_id: String },
    DuplicateGroup { group_id: String },
    UnknownGroup { group_id: String },
    BookLeak { book_id: String },
    IneligibleTestGroup { group_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioWarning {
    pub language: String,
    pub achieved: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SplitReport {
    pub violations: Vec<SplitViolation>,
    pub ratio_warnings: Vec<RatioWarning>,
}

impl SplitReport {
    /// No invariant violations. Ratio warnings do not count.
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-checks every split invariant from the partitions themselves.
pub fn validate_split(
    result: &SplitResult,
    corpus: &Corpus,
    scores: &ScoreTable,
    spec: &SplitSpec,
) -> SplitReport {
    let mut report = SplitReport::default();
    let mut seen: HashSet<&str> = HashSet::new();
    let parts = [&result.train, &result.val, &result.test];
    for part in parts {
        for g in part {
            if !corpus.contains(&g.group_id) {
                report.violations.push(SplitViolation::UnknownGroup {
                    group_id: g.group_id.clone(),
                });
            } else if !seen.insert(&g.group_id) {
                report.violations.push(SplitViolation::DuplicateGroup {
                    group_id: g.group_id.clone(),
                });
            }
        }
    }
    for g in corpus {
        if !seen.contains(g.group_id.as_str()) {
            report.violations.push(SplitViolation::MissingGroup {
                group_id: g.group_id.clone(),
            });
        }
    }

    let train_books: BTreeSet<&str> = result.train.iter().map(|g| g.book_id.as_str()).collect();
    let heldout_books: BTreeSet<&str> = result
        .val
        .iter()
        .chain(&result.test)
        .map(|g| g.book_id.as_str())
        .collect();
    for book in train_books.intersection(&heldout_books) {
        report.violations.push(SplitViolation::BookLeak {
            book_id: book.to_string(),
        });
    }

    for g in &result.test {
        if !test_eligible(g, scores) {
            report.violations.push(SplitViolation::IneligibleTestGroup {
                group_id: g.group_id.clone(),
            });
        }
    }

    let mut per_language: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (i, part) in parts.iter().enumerate() {
        for g in *part {
            let e = per_language.entry(&g.language).or_default();
            e.1 += 1;
            if i == 0 {
                e.0 += 1;
            }
        }
    }
    for (language, (train, total)) in per_language {
        let achieved = train as f64 / total as f64;
        let deviation = (achieved - spec.train_fraction).abs();
        if deviation > spec.ratio_tolerance + 1e-12 {
            report.ratio_warnings.push(RatioWarning {
                language: language.to_string(),
                achieved,
                deviation,
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::group;
    use crate::similarity::{PairScore, ScoredGroup, Thresholds};

    fn scored(id: &str, sim: f64) -> ScoredGroup {
        ScoredGroup::from_pairwise(
            id,
            vec![PairScore {
                ref_id_a: "r1".into(),
                ref_id_b: "r2".into(),
                score: sim,
            }],
            &Thresholds::default(),
        )
        .unwrap()
    }

    /// `books` is (book_id, paragraph count); every group is Medium unless `sim` says otherwise.
    fn build(books: &[(&str, usize)], sim: f64) -> (Corpus, ScoreTable) {
        let mut groups = Vec::new();
        let mut scores = Vec::new();
        for (book, n) in books {
            for i in 0..*n {
                let id = format!("{book}-{i}");
                groups.push(group(&id, "x", book, &["a", "b"]));
                scores.push(scored(&id, sim));
            }
        }
        (Corpus::new(groups).unwrap(), ScoreTable::new(scores).unwrap())
    }

    #[test]
    fn two_books_split_exactly() {
        let (corpus, scores) = build(&[("B2", 2), ("B1", 8)], 0.6);
        for seed in 0..10 {
            let spec = SplitSpec { seed, ..SplitSpec::default() };
            let r = split(&corpus, &scores, &spec).unwrap();
            assert_eq!(r.book_assignment["B1"], BookPartition::Train);
            assert_eq!(r.book_assignment["B2"], BookPartition::Heldout);
            assert_eq!(r.per_language_ratios["x"], 0.8);
            assert_eq!(r.train.len(), 8);
            assert_eq!(r.val.len() + r.test.len(), 2);
            assert!(validate_split(&r, &corpus, &scores, &spec).is_valid());
        }
    }

    #[test]
    fn low_heldout_goes_to_val() {
        let (corpus, scores) = build(&[("B1", 8), ("B2", 4)], 0.2);
        let r = split(&corpus, &scores, &SplitSpec::default()).unwrap();
        assert!(r.test.is_empty());
        assert_eq!(r.val.len(), 4);
    }

    #[test]
    fn deterministic() {
        let (corpus, scores) = build(&[("a", 5), ("b", 7), ("c", 3), ("d", 9), ("e", 1)], 0.6);
        let spec = SplitSpec { seed: 3, ..SplitSpec::default() };
        let r1 = split(&corpus, &scores, &spec).unwrap();
        let r2 = split(&corpus, &scores, &spec).unwrap();
        assert_eq!(r1.train, r2.train);
        assert_eq!(r1.val, r2.val);
        assert_eq!(r1.test, r2.test);
        assert_eq!(r1.book_assignment, r2.book_assignment);
    }

    #[test]
    fn single_book_language_falls_back_to_train() {
        let (corpus, scores) = build(&[("only", 6)], 0.6);
        let r = split(&corpus, &scores, &SplitSpec::default()).unwrap();
        assert_eq!(r.train.len(), 6);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn errors() {
        let (corpus, _) = build(&[("a", 2), ("b", 2)], 0.6);
        assert!(matches!(
            split(&corpus, &ScoreTable::default(), &SplitSpec::default()),
            Err(Error::MissingScore(_))
        ));
        assert!(matches!(
            split(&Corpus::default(), &ScoreTable::default(), &SplitSpec::default()),
            Err(Error::EmptyCorpus)
        ));
        let bad = SplitSpec { train_fraction: 1.0, ..SplitSpec::default() };
        assert!(split(&corpus, &ScoreTable::default(), &bad).is_err());
    }

    #[test]
    fn validation_flags_leaks_and_ratios() {
        let (corpus, scores) = build(&[("B1", 7), ("B2", 3)], 0.6);
        let spec = SplitSpec::default();
        let mut r = split(&corpus, &scores, &spec).unwrap();

        // 7 + 3 paragraphs: train can only take B1, achieved 0.70 against tolerance 0.05
        let report = validate_split(&r, &corpus, &scores, &spec);
        assert!(report.is_valid());
        assert_eq!(r.per_language_ratios["x"], 0.7);
        assert_eq!(report.ratio_warnings.len(), 1);
        assert!((report.ratio_warnings[0].achieved - 0.7).abs() < 1e-12);

        // move a B1 paragraph into test
        let moved = r.train.groups()[0].clone();
        r.train = r.train.filtered(|g| g.group_id != moved.group_id);
        r.test.push(moved).unwrap();
        let report = validate_split(&r, &corpus, &scores, &spec);
        assert!(report
            .violations
            .contains(&SplitViolation::BookLeak { book_id: "B1".into() }));
    }
}
