//! Training-set construction: Single, bin-filtered (e.g. Medium), Unfiltered,
//! Medium+Low / Medium+High step series and the High-subcategory ablations.
//!
//! Every builder is a pure function of `(corpus, scores, spec)`. Random
//! choices come from [`crate::rng`] streams keyed by the spec seed, so a build
//! is reproducible bit for bit.

use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{CountInstances, Corpus, InstanceCount, ParallelGroup, ReferenceText};
use crate::error::{Error, Result};
use crate::rng;
use crate::similarity::{HighSubcategory, ScoreTable, SimilarityBin};

/// Number of slices an add-bin is cut into for the Medium+X series.
pub const MEDIUM_PLUS_SLICES: u32 = 10;

/// Suffix appended to the ids of repetition-augmented groups and references.
pub const REPETITION_SUFFIX: &str = "#rep";

/// One (source, reference) training pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub group_id: String,
    pub ref_id: String,
    pub language: String,
    pub source_text: String,
    pub target_text: String,
}

impl TrainingInstance {
    fn new(group: &ParallelGroup, reference: &ReferenceText) -> Self {
        TrainingInstance {
            group_id: group.group_id.clone(),
            ref_id: reference.ref_id.clone(),
            language: group.language.clone(),
            source_text: group.source_text.clone(),
            target_text: reference.text.clone(),
        }
    }

    /// Corpus group this instance derives from (strips the repetition suffix).
    pub fn origin_group_id(&self) -> &str {
        self.group_id
            .strip_suffix(REPETITION_SUFFIX)
            .unwrap_or(&self.group_id)
    }
}

impl CountInstances for [TrainingInstance] {
    fn count_instances(&self) -> InstanceCount {
        let sources: HashSet<&str> = self.iter().map(|i| i.group_id.as_str()).collect();
        InstanceCount {
            num_source: sources.len(),
            num_instance: self.len(),
        }
    }
}

/// Dataset recipe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Recipe {
    /// One uniformly chosen reference per sampled group.
    Single { n_source: Option<usize> },
    /// Groups of one similarity bin, all references.
    BinFiltered {
        bin: SimilarityBin,
        n_source: Option<usize>,
    },
    /// All groups, all references.
    Unfiltered { n_source: Option<usize> },
    /// Full Medium bin plus the first `steps` tenths of `add_bin`.
    MediumPlus { add_bin: SimilarityBin, steps: u32 },
    /// Full Medium bin plus a tenth of the High bin drawn from one subcategory.
    AblationHigh { subcategory: HighSubcategory },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(flatten)]
    pub recipe: Recipe,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shuffle_seed: Option<u64>,
}

impl DatasetSpec {
    pub fn new(recipe: Recipe, seed: u64) -> Self {
        DatasetSpec {
            recipe,
            seed,
            shuffle_seed: None,
        }
    }

    pub fn build(&self, corpus: &Corpus, scores: &ScoreTable) -> Result<Dataset> {
        let seed = self.seed;
        let dataset = match self.recipe {
            Recipe::Single { n_source } => {
                build_single(corpus, n_source.unwrap_or(corpus.len()), seed)
            }
            Recipe::BinFiltered { bin, n_source } => {
                build_bin_filtered(corpus, scores, bin, n_source, seed)
            }
            Recipe::Unfiltered { n_source } => build_unfiltered(corpus, n_source, seed),
            Recipe::MediumPlus { add_bin, steps } => {
                build_medium_plus(corpus, scores, add_bin, steps, seed)
            }
            Recipe::AblationHigh { subcategory } => {
                build_ablation_high(corpus, scores, subcategory, seed)
            }
        }?;
        match self.shuffle_seed {
            Some(s) => Ok(shuffle_instances(dataset, s)),
            None => Ok(dataset),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    spec: DatasetSpec,
    instances: Vec<TrainingInstance>,
    num_source: usize,
    num_instance: usize,
}

impl Dataset {
    pub fn new(spec: DatasetSpec, instances: Vec<TrainingInstance>) -> Self {
        let c = instances.count_instances();
        Dataset {
            spec,
            instances,
            num_source: c.num_source,
            num_instance: c.num_instance,
        }
    }

    pub fn spec(&self) -> &DatasetSpec {
        &self.spec
    }

    pub fn instances(&self) -> &[TrainingInstance] {
        &self.instances
    }

    pub fn num_source(&self) -> usize {
        self.num_source
    }

    pub fn num_instance(&self) -> usize {
        self.num_instance
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Checks that no `(group_id, ref_id)` pair repeats.
    pub fn check_unique(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for i in &self.instances {
            if !seen.insert((i.group_id.as_str(), i.ref_id.as_str())) {
                return Err(Error::InvalidGroup {
                    group_id: i.group_id.clone(),
                    message: format!("reference `{}` appears twice in the dataset", i.ref_id),
                });
            }
        }
        Ok(())
    }
}

impl CountInstances for Dataset {
    fn count_instances(&self) -> InstanceCount {
        InstanceCount {
            num_source: self.num_source,
            num_instance: self.num_instance,
        }
    }
}

fn all_references<'a>(groups: impl IntoIterator<Item = &'a ParallelGroup>) -> Vec<TrainingInstance> {
    groups
        .into_iter()
        .flat_map(|g| g.references.iter().map(move |r| TrainingInstance::new(g, r)))
        .collect()
}

/// `n` of `pool` sampled uniformly without replacement, returned in pool order.
fn subsample<'a, T>(pool: &[&'a T], n: usize, rng: &mut rng::Rng) -> Result<Vec<&'a T>> {
    if n > pool.len() {
        return Err(Error::NotEnoughGroups {
            requested: n,
            available: pool.len(),
        });
    }
    let mut picked = index::sample(rng, pool.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| pool[i]).collect())
}

fn groups_in_bin<'a>(
    corpus: &'a Corpus,
    scores: &ScoreTable,
    bin: SimilarityBin,
) -> Result<Vec<&'a ParallelGroup>> {
    let mut out = Vec::new();
    for g in corpus {
        if !g.is_multi_reference() {
            continue;
        }
        let scored = scores
            .get(&g.group_id)
            .ok_or_else(|| Error::MissingScore(g.group_id.clone()))?;
        if scored.bin == bin {
            out.push(g);
        }
    }
    Ok(out)
}

pub fn build_single(corpus: &Corpus, n_source: usize, seed: u64) -> Result<Dataset> {
    let pool: Vec<&ParallelGroup> = corpus.iter().collect();
    let mut rng = rng::labeled(seed, "dataset/single");
    let picked = subsample(&pool, n_source, &mut rng)?;
    let instances = picked
        .into_iter()
        .map(|g| {
            let r = &g.references[rng.random_range(0..g.references.len())];
            TrainingInstance::new(g, r)
        })
        .collect();
    let spec = DatasetSpec::new(
        Recipe::Single {
            n_source: Some(n_source),
        },
        seed,
    );
    Ok(Dataset::new(spec, instances))
}

pub fn build_bin_filtered(
    corpus: &Corpus,
    scores: &ScoreTable,
    bin: SimilarityBin,
    n_source: Option<usize>,
    seed: u64,
) -> Result<Dataset> {
    let kept = groups_in_bin(corpus, scores, bin)?;
    let kept = match n_source {
        Some(n) => subsample(&kept, n, &mut rng::labeled(seed, "dataset/bin_filtered"))?,
        None => kept,
    };
    let spec = DatasetSpec::new(Recipe::BinFiltered { bin, n_source }, seed);
    Ok(Dataset::new(spec, all_references(kept)))
}

pub fn build_unfiltered(corpus: &Corpus, n_source: Option<usize>, seed: u64) -> Result<Dataset> {
    let pool: Vec<&ParallelGroup> = corpus.iter().collect();
    let kept = match n_source {
        Some(n) => subsample(&pool, n, &mut rng::labeled(seed, "dataset/unfiltered"))?,
        None => pool,
    };
    let spec = DatasetSpec::new(Recipe::Unfiltered { n_source }, seed);
    Ok(Dataset::new(spec, all_references(kept)))
}

/// Slice size for cutting `n` groups into [`MEDIUM_PLUS_SLICES`] parts.
pub fn slice_size(n: usize) -> usize {
    n.div_ceil(MEDIUM_PLUS_SLICES as usize)
}

pub fn build_medium_plus(
    corpus: &Corpus,
    scores: &ScoreTable,
    add_bin: SimilarityBin,
    steps: u32,
    seed: u64,
) -> Result<Dataset> {
    if add_bin == SimilarityBin::Medium {
        return Err(Error::invalid("add_bin must be low or high"));
    }
    if steps > MEDIUM_PLUS_SLICES {
        return Err(Error::invalid(format!(
            "steps must be at most {MEDIUM_PLUS_SLICES}, got {steps}"
        )));
    }
    let medium = groups_in_bin(corpus, scores, SimilarityBin::Medium)?;
    let mut extra = groups_in_bin(corpus, scores, add_bin)?;
    // The permutation does not depend on `steps`, so steps are cumulative.
    extra.shuffle(&mut rng::labeled(seed, "dataset/medium_plus"));
    let take = (steps as usize * slice_size(extra.len())).min(extra.len());
    let chosen: HashSet<&str> = medium
        .iter()
        .chain(&extra[..take])
        .map(|g| g.group_id.as_str())
        .collect();
    let spec = DatasetSpec::new(Recipe::MediumPlus { add_bin, steps }, seed);
    Ok(Dataset::new(
        spec,
        all_references(corpus.iter().filter(|g| chosen.contains(g.group_id.as_str()))),
    ))
}

pub fn build_ablation_high(
    corpus: &Corpus,
    scores: &ScoreTable,
    subcategory: HighSubcategory,
    seed: u64,
) -> Result<Dataset> {
    let medium = groups_in_bin(corpus, scores, SimilarityBin::Medium)?;
    let high = groups_in_bin(corpus, scores, SimilarityBin::High)?;
    let slice = slice_size(high.len());
    let sub_of = |g: &ParallelGroup| scores.get(&g.group_id).and_then(|s| s.high_subcategory);
    let (candidates, pool): (Vec<&ParallelGroup>, Vec<&ParallelGroup>) =
        high.iter().partition(|g| sub_of(g) == Some(subcategory));

    let mut rng = rng::labeled(seed, "dataset/ablation_high");
    let (picked, synthetic) = if candidates.len() >= slice {
        (subsample(&candidates, slice, &mut rng)?, Vec::new())
    } else {
        let shortfall = slice - candidates.len();
        tracing::info!(
            "subcategory {subcategory} has {} groups, padding {shortfall} by repetition",
            candidates.len()
        );
        let synthetic = augment_repetition(&pool, shortfall, seed)?;
        (candidates, synthetic)
    };

    let chosen: HashSet<&str> = medium
        .iter()
        .chain(&picked)
        .map(|g| g.group_id.as_str())
        .collect();
    let mut instances =
        all_references(corpus.iter().filter(|g| chosen.contains(g.group_id.as_str())));
    instances.extend(all_references(&synthetic));
    let spec = DatasetSpec::new(Recipe::AblationHigh { subcategory }, seed);
    Ok(Dataset::new(spec, instances))
}

/// Synthesizes `k` identical-reference groups: each sampled pool group
/// contributes one uniformly chosen reference `r`, emitted as `{r, r#rep}`
/// under group id `<group_id>#rep`.
pub fn augment_repetition(
    pool: &[&ParallelGroup],
    k: usize,
    seed: u64,
) -> Result<Vec<ParallelGroup>> {
    if k > pool.len() {
        return Err(Error::PoolExhausted {
            needed: k,
            available: pool.len(),
        });
    }
    let mut rng = rng::labeled(seed, "dataset/repetition");
    let picked = subsample(pool, k, &mut rng)?;
    Ok(picked
        .into_iter()
        .map(|g| {
            let r = &g.references[rng.random_range(0..g.references.len())];
            let copy = ReferenceText {
                ref_id: format!("{}{REPETITION_SUFFIX}", r.ref_id),
                translator_id: r.translator_id.clone(),
                text: r.text.clone(),
            };
            ParallelGroup {
                group_id: format!("{}{REPETITION_SUFFIX}", g.group_id),
                language: g.language.clone(),
                book_id: g.book_id.clone(),
                paragraph_index: g.paragraph_index,
                source_text: g.source_text.clone(),
                references: vec![r.clone(), copy],
            }
        })
        .collect())
}

/// Seeded uniform permutation of the instances.
pub fn shuffle_instances(dataset: Dataset, seed: u64) -> Dataset {
    let Dataset {
        mut spec,
        mut instances,
        ..
    } = dataset;
    instances.shuffle(&mut rng::labeled(seed, "dataset/shuffle"));
    spec.shuffle_seed = Some(seed);
    Dataset::new(spec, instances)
}
