//! Configuration file and the end-to-end run: ingest, score, bin, split,
//! build every requested dataset and export it.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    corpus_stats, filter_by_word_limit, load_corpus, write_corpus, Corpus, SkippedLine, Validation,
};
use crate::dataset::{Dataset, DatasetSpec, Recipe};
use crate::error::{Error, Result};
use crate::export::{
    composition_report, export_pairs, export_prompt_lines, histogram_svg, write_composition_csv,
    write_histogram_csv, ExportFormat, PromptOptions, PROMPT_DELIMITER,
};
use crate::manifest::{Manifest, RunStatus};
use crate::metrics::MetricConfig;
use crate::significance::BootstrapConfig;
use crate::similarity::{
    histogram, import_scores, load_embeddings, write_scored, EmbeddingScorer, GroupScorer,
    HighSubcategory, ImportedScores, ScoreTable, SimilarityBin, Thresholds,
};
use crate::split::{split, validate_split, SplitResult, SplitSpec};

pub const RUN_MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    #[serde(default)]
    pub corpus: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<PathBuf>,
    #[serde(default)]
    pub lenient: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("litref-out"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuntimeConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimilarityConfig {
    pub low_hi: f64,
    pub med_hi: f64,
    pub histogram_bin_width: f64,
    pub strict_import: bool,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        let t = Thresholds::default();
        SimilarityConfig {
            low_hi: t.low_hi,
            med_hi: t.med_hi,
            histogram_bin_width: 0.05,
            strict_import: true,
        }
    }
}

impl SimilarityConfig {
    pub fn thresholds(&self) -> Result<Thresholds> {
        Thresholds::new(self.low_hi, self.med_hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    /// When false, datasets are built from the whole corpus.
    pub enabled: bool,
    pub train_fraction: f64,
    pub val_test_ratio: f64,
    pub ratio_tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let s = SplitSpec::default();
        SplitConfig {
            enabled: true,
            train_fraction: s.train_fraction,
            val_test_ratio: s.val_test_ratio,
            ratio_tolerance: s.ratio_tolerance,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExportConfig {
    pub formats: Vec<ExportFormat>,
    pub delimiter: String,
    pub include_language_tag: bool,
}

impl Default for ExportConfig {
    fn default() -> Self {
        ExportConfig {
            formats: vec![ExportFormat::PairRecords, ExportFormat::PromptLines],
            delimiter: PROMPT_DELIMITER.to_string(),
            include_language_tag: false,
        }
    }
}

impl ExportConfig {
    pub fn prompt_options(&self) -> PromptOptions {
        PromptOptions {
            delimiter: self.delimiter.clone(),
            include_language_tag: self.include_language_tag,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecipeKind {
    Single,
    BinFiltered,
    Unfiltered,
    MediumPlus,
    AblationHigh,
}

/// One `[[datasets]]` table. Which optional fields apply depends on `kind`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub kind: RecipeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_source: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin: Option<SimilarityBin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub add_bin: Option<SimilarityBin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcategory: Option<HighSubcategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shuffle_seed: Option<u64>,
}

impl DatasetEntry {
    pub fn spec(&self, default_seed: u64) -> Result<DatasetSpec> {
        let name = &self.name;
        let need = |field: &str| Error::Config(format!("dataset `{name}`: `{field}` is required"));
        let unused = |present: bool, field: &str| -> Result<()> {
            if present {
                Err(Error::Config(format!(
                    "dataset `{name}`: `{field}` does not apply to this kind"
                )))
            } else {
                Ok(())
            }
        };
        let recipe = match self.kind {
            RecipeKind::Single | RecipeKind::Unfiltered => {
                unused(self.bin.is_some(), "bin")?;
                unused(self.add_bin.is_some(), "add_bin")?;
                unused(self.steps.is_some(), "steps")?;
                unused(self.subcategory.is_some(), "subcategory")?;
                if self.kind == RecipeKind::Single {
                    Recipe::Single { n_source: self.n_source }
                } else {
                    Recipe::Unfiltered { n_source: self.n_source }
                }
            }
            RecipeKind::BinFiltered => {
                unused(self.add_bin.is_some(), "add_bin")?;
                unused(self.steps.is_some(), "steps")?;
                unused(self.subcategory.is_some(), "subcategory")?;
                Recipe::BinFiltered {
                    bin: self.bin.ok_or_else(|| need("bin"))?,
                    n_source: self.n_source,
                }
            }
            RecipeKind::MediumPlus => {
                unused(self.n_source.is_some(), "n_source")?;
                unused(self.bin.is_some(), "bin")?;
                unused(self.subcategory.is_some(), "subcategory")?;
                let add_bin = self.add_bin.ok_or_else(|| need("add_bin"))?;
                let steps = self.steps.ok_or_else(|| need("steps"))?;
                if add_bin == SimilarityBin::Medium {
                    return Err(Error::Config(format!("dataset `{name}`: add_bin must be low or high")));
                }
                if steps > crate::dataset::MEDIUM_PLUS_SLICES {
                    return Err(Error::Config(format!(
                        "dataset `{name}`: steps must be at most {}",
                        crate::dataset::MEDIUM_PLUS_SLICES
                    )));
                }
                Recipe::MediumPlus { add_bin, steps }
            }
            RecipeKind::AblationHigh => {
                unused(self.n_source.is_some(), "n_source")?;
                unused(self.bin.is_some(), "bin")?;
                unused(self.add_bin.is_some(), "add_bin")?;
                unused(self.steps.is_some(), "steps")?;
                Recipe::AblationHigh {
                    subcategory: self.subcategory.ok_or_else(|| need("subcategory"))?,
                }
            }
        };
        Ok(DatasetSpec {
            recipe,
            seed: self.seed.unwrap_or(default_seed),
            shuffle_seed: self.shuffle_seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapSection {
    pub resamples: usize,
    pub sample_fraction: f64,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        let b = BootstrapConfig::default();
        BootstrapSection {
            resamples: b.resamples,
            sample_fraction: b.sample_fraction,
            alpha: b.alpha,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub runtime: RuntimeConfig,
    #[serde(default)]
    pub similarity: SimilarityConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub export: ExportConfig,
    #[serde(default)]
    pub metrics: MetricConfig,
    #[serde(default)]
    pub bootstrap: BootstrapSection,
    #[serde(default)]
    pub datasets: Vec<DatasetEntry>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    /// Parses and fully validates a pipeline config.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config = Self::parse_params(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Parses a config and validates everything except `[input]`, for use
    /// as a source of defaults by single-stage commands.
    pub fn parse_params(text: &str) -> Result<Self> {
        let config: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate_params()?;
        Ok(config)
    }

    /// Reads a config file (see [`Self::parse_params`]); relative paths
    /// resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse_params(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_params()?;
        if self.input.corpus.as_os_str().is_empty() {
            return Err(Error::Config("input needs `corpus`".into()));
        }
        if self.input.embeddings.is_none() && self.input.scores.is_none() {
            return Err(Error::Config("input needs `embeddings`, `scores` or both".into()));
        }
        Ok(())
    }

    pub fn validate_params(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::InvalidParameter(m) => Error::Config(m),
            other => other,
        };
        self.similarity.thresholds().map_err(cfg)?;
        let w = self.similarity.histogram_bin_width;
        if !(w > 0.0 && w <= 2.0) {
            return Err(Error::Config(format!("histogram_bin_width must be in (0, 2], got {w}")));
        }
        self.split_spec().validate().map_err(cfg)?;
        self.bootstrap_config().validate().map_err(cfg)?;
        if let Some(0) = self.input.word_limit {
            return Err(Error::Config("word_limit must be positive".into()));
        }
        if self.runtime.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        if self.export.delimiter.is_empty() {
            return Err(Error::Config("export delimiter must not be empty".into()));
        }
        crate::metrics::Bleu::new(self.metrics.bleu).map_err(cfg)?;
        crate::metrics::Chrf::new(self.metrics.chrfpp).map_err(cfg)?;
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            let ok = !d.name.is_empty()
                && d.name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '@' | '+'))
                && !d.name.starts_with('.');
            if !ok {
                return Err(Error::Config(format!("invalid dataset name `{}`", d.name)));
            }
            if !names.insert(d.name.as_str()) {
                return Err(Error::Config(format!("duplicate dataset name `{}`", d.name)));
            }
            d.spec(self.seed)?;
        }
        Ok(())
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.split.train_fraction,
            val_test_ratio: self.split.val_test_ratio,
            seed: self.split.seed.unwrap_or(self.seed),
            ratio_tolerance: self.split.ratio_tolerance,
        }
    }

    pub fn bootstrap_config(&self) -> BootstrapConfig {
        BootstrapConfig {
            resamples: self.bootstrap.resamples,
            sample_fraction: self.bootstrap.sample_fraction,
            seed: self.bootstrap.seed.unwrap_or(self.seed),
            alpha: self.bootstrap.alpha,
        }
    }

    /// The resolved config as TOML, for logging.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parameters recorded in manifests. Thread count and output location
    /// are left out since neither affects the artifacts.
    pub fn manifest_parameters(&self) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output");
            obj.remove("runtime");
        }
        Ok(v)
    }
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::invalid("threads must be positive")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestSummary {
    pub loaded: usize,
    pub skipped: Vec<SkippedLine>,
    pub over_word_limit: usize,
    pub kept: usize,
}

pub fn ingest(path: &Path, lenient: bool, word_limit: Option<usize>) -> Result<(Corpus, IngestSummary)> {
    let mode = if lenient { Validation::Lenient } else { Validation::Strict };
    let report = load_corpus(BufReader::new(File::open(path)?), mode)?;
    for s in &report.skipped {
        tracing::warn!("skipped line {}: {}", s.line, s.reason);
    }
    let loaded = report.corpus.len();
    let corpus = match word_limit {
        Some(limit) => filter_by_word_limit(&report.corpus, limit)?,
        None => report.corpus,
    };
    let summary = IngestSummary {
        loaded,
        skipped: report.skipped,
        over_word_limit: loaded - corpus.len(),
        kept: corpus.len(),
    };
    Ok((corpus, summary))
}

/// Scoring inputs loaded from disk; borrow a [`GroupScorer`] from it.
pub struct ScoringInputs {
    pub scorer: Option<EmbeddingScorer>,
    pub imported: Option<ImportedScores>,
    pub thresholds: Thresholds,
    pub strict_import: bool,
}

impl ScoringInputs {
    pub fn load(
        embeddings: Option<&Path>,
        scores: Option<&Path>,
        thresholds: Thresholds,
        strict_import: bool,
    ) -> Result<Self> {
        let scorer = match embeddings {
            Some(p) => {
                let load = load_embeddings(BufReader::new(File::open(p)?))?;
                if load.conflicts > 0 {
                    tracing::warn!("{} duplicate embedding tokens, first kept", load.conflicts);
                }
                Some(EmbeddingScorer::new(Arc::new(load.table)))
            }
            None => None,
        };
        let imported = match scores {
            Some(p) => Some(import_scores(BufReader::new(File::open(p)?))?),
            None => None,
        };
        if scorer.is_none() && imported.is_none() {
            return Err(Error::invalid("scoring needs embeddings or imported scores"));
        }
        Ok(ScoringInputs {
            scorer,
            imported,
            thresholds,
            strict_import,
        })
    }

    pub fn group_scorer(&self) -> GroupScorer<'_> {
        GroupScorer {
            scorer: self.scorer.as_ref().map(|s| s as _),
            imported: self.imported.as_ref(),
            thresholds: self.thresholds,
            strict_import: self.strict_import,
        }
    }

    pub fn check_known(&self, corpus: &Corpus) -> Result<()> {
        match &self.imported {
            Some(imp) => imp.check_known(corpus, self.strict_import),
            None => Ok(()),
        }
    }
}

/// Tracks files written under one root directory.
pub struct OutputTree {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputTree {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(OutputTree {
            root,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `rel` through `f`, creating parent directories.
    pub fn write(
        &mut self,
        rel: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        self.written.push(rel.to_string());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        self.write(rel, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    /// Adds every written file, sorted by path, to `manifest.outputs`.
    pub fn record(&self, manifest: &mut Manifest) -> Result<()> {
        let mut rels = self.written.clone();
        rels.sort();
        rels.dedup();
        for rel in rels {
            manifest.add_output(&self.root.join(&rel), rel)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetInfo {
    pub name: String,
    pub spec: DatasetSpec,
    pub num_source: usize,
    pub num_instance: usize,
}

/// Writes `<name>.json`, the requested export formats and the composition
/// table for one dataset under `prefix`.
pub fn write_dataset(
    out: &mut OutputTree,
    prefix: &str,
    name: &str,
    dataset: &Dataset,
    corpus: &Corpus,
    export: &ExportConfig,
) -> Result<()> {
    let info = DatasetInfo {
        name: name.to_string(),
        spec: dataset.spec().clone(),
        num_source: dataset.num_source(),
        num_instance: dataset.num_instance(),
    };
    out.write_json(&format!("{prefix}{name}.json"), &info)?;
    let mut formats = export.formats.clone();
    formats.dedup();
    for format in formats {
        match format {
            ExportFormat::PairRecords => {
                out.write(&format!("{prefix}{name}.pairs.jsonl"), |w| export_pairs(dataset, w))?;
            }
            ExportFormat::PromptLines => {
                let opts = export.prompt_options();
                out.write(&format!("{prefix}{name}.prompt.txt"), |w| {
                    export_prompt_lines(dataset, &opts, w)
                })?;
            }
        }
    }
    let rows = composition_report(dataset.instances(), corpus)?;
    out.write(&format!("{prefix}{name}.composition.csv"), |w| {
        write_composition_csv(&rows, w)
    })?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitReportFile<'a> {
    pub per_language_ratios: &'a std::collections::BTreeMap<String, f64>,
    pub book_assignment: &'a std::collections::BTreeMap<String, crate::split::BookPartition>,
    pub warnings: &'a [String],
    pub sizes: [usize; 3],
    pub validation: crate::split::SplitReport,
}

pub fn write_split(
    out: &mut OutputTree,
    prefix: &str,
    result: &SplitResult,
    corpus: &Corpus,
    scores: &ScoreTable,
    spec: &SplitSpec,
) -> Result<()> {
    for (name, part) in [("train", &result.train), ("val", &result.val), ("test", &result.test)] {
        out.write(&format!("{prefix}{name}.jsonl"), |w| write_corpus(part, w))?;
    }
    let report = SplitReportFile {
        per_language_ratios: &result.per_language_ratios,
        book_assignment: &result.book_assignment,
        warnings: &result.warnings,
        sizes: [result.train.len(), result.val.len(), result.test.len()],
        validation: validate_split(result, corpus, scores, spec),
    };
    out.write_json(&format!("{prefix}report.json"), &report)?;
    Ok(())
}

/// Pipeline error tagged with the stage that produced it.
#[derive(Debug, thiserror::Error)]
#[error("{stage}: {error}")]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineSummary {
    pub groups: usize,
    pub scored: usize,
    pub datasets: Vec<DatasetInfo>,
    pub outputs: Vec<String>,
}

/// Runs every stage into `config.output.dir` (resolved). On failure a
/// partial manifest naming the failed stage is still written.
pub fn pipeline_all(config: &PipelineConfig) -> std::result::Result<PipelineSummary, StageError> {
    let at = |stage: &'static str| move |error: Error| StageError { stage, error };
    config.validate().map_err(at("config"))?;
    tracing::info!("resolved config:\n{}", config.to_toml().unwrap_or_default());

    let mut out = OutputTree::new(config.resolve(&config.output.dir)).map_err(at("output"))?;
    let mut manifest = Manifest::new("pipeline")
        .with_seed(config.seed)
        .with_parameters(&config.manifest_parameters().map_err(at("config"))?)
        .map_err(at("config"))?;

    let result = run_stages(config, &mut out, &mut manifest);
    if let Err(e) = &result {
        manifest.status = RunStatus::Partial {
            stage: e.stage.to_string(),
            error: e.error.to_string(),
        };
    }
    let finish = out
        .record(&mut manifest)
        .and_then(|_| manifest.write(&out.root().join(RUN_MANIFEST)));
    let mut summary = result?;
    finish.map_err(at("manifest"))?;
    summary.outputs = out.written().to_vec();
    Ok(summary)
}

fn run_stages(
    config: &PipelineConfig,
    out: &mut OutputTree,
    manifest: &mut Manifest,
) -> std::result::Result<PipelineSummary, StageError> {
    let at = |stage: &'static str| move |error: Error| StageError { stage, error };
    let input = &config.input;

    // ingest
    let corpus_path = config.resolve(&input.corpus);
    manifest
        .add_input(&corpus_path, input.corpus.display().to_string())
        .map_err(at("ingest"))?;
    let (corpus, ingest_summary) =
        ingest(&corpus_path, input.lenient, input.word_limit).map_err(at("ingest"))?;
    if corpus.is_empty() {
        return Err(at("ingest")(Error::EmptyCorpus));
    }
    out.write("corpus.jsonl", |w| write_corpus(&corpus, w)).map_err(at("ingest"))?;
    out.write_json("ingest.json", &ingest_summary).map_err(at("ingest"))?;
    out.write_json("corpus_stats.json", &corpus_stats(&corpus)).map_err(at("ingest"))?;

    // score + bin
    let thresholds = config.similarity.thresholds().map_err(at("score"))?;
    for p in [&input.embeddings, &input.scores].into_iter().flatten() {
        manifest
            .add_input(&config.resolve(p), p.display().to_string())
            .map_err(at("score"))?;
    }
    let inputs = ScoringInputs::load(
        input.embeddings.as_ref().map(|p| config.resolve(p)).as_deref(),
        input.scores.as_ref().map(|p| config.resolve(p)).as_deref(),
        thresholds,
        config.similarity.strict_import,
    )
    .map_err(at("score"))?;
    inputs.check_known(&corpus).map_err(at("score"))?;
    let scores = inputs.group_scorer().score_all(corpus.groups()).map_err(at("score"))?;
    out.write("scored.jsonl", |w| write_scored(&scores, w)).map_err(at("score"))?;

    let bins = histogram(scores.iter().map(|g| g.sim_p), config.similarity.histogram_bin_width)
        .map_err(at("histogram"))?;
    out.write("histogram.csv", |w| write_histogram_csv(&bins, w))
        .map_err(at("histogram"))?;
    out.write("histogram.svg", |w| {
        w.write_all(histogram_svg(&bins, &thresholds).as_bytes())?;
        Ok(())
    })
    .map_err(at("histogram"))?;

    // split
    let train = if config.split.enabled {
        let spec = config.split_spec();
        let result = split(&corpus, &scores, &spec).map_err(at("split"))?;
        write_split(out, "split/", &result, &corpus, &scores, &spec).map_err(at("split"))?;
        result.train
    } else {
        corpus.clone()
    };

    // build + export
    let mut datasets = Vec::new();
    for entry in &config.datasets {
        let spec = entry.spec(config.seed).map_err(at("build"))?;
        let dataset = spec.build(&train, &scores).map_err(at("build"))?;
        tracing::info!(
            "dataset {}: {} sources, {} instances",
            entry.name,
            dataset.num_source(),
            dataset.num_instance()
        );
        write_dataset(out, "datasets/", &entry.name, &dataset, &train, &config.export)
            .map_err(at("export"))?;
        datasets.push(DatasetInfo {
            name: entry.name.clone(),
            spec,
            num_source: dataset.num_source(),
            num_instance: dataset.num_instance(),
        });
    }

    Ok(PipelineSummary {
        groups: corpus.len(),
        scored: scores.len(),
        datasets,
        outputs: Vec::new(),
    })
}
