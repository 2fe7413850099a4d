use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use litref_core::corpus::{corpus_stats, write_corpus, Corpus};
use litref_core::export::{
    composition_report, histogram_svg, load_pairs, write_composition_csv, write_gain_csv,
    write_histogram_csv, PromptOptions,
};
use litref_core::manifest::{sidecar_path, Manifest};
use litref_core::metrics::{
    average_external_scores, evaluate_stream, join_segments, per_language_gain,
    read_external_scores, read_hypotheses, segment_means, Bleu, Chrf, CorpusMetric, MeanScore,
    MetricConfig, MetricReport, SegmentEval,
};
use litref_core::pipeline::{
    ingest, pipeline_all, write_split, DatasetEntry, OutputTree, PipelineConfig, ScoringInputs,
    RUN_MANIFEST,
};
use litref_core::significance::{
    paired_bootstrap_stats, significance_grid, BootstrapConfig, GridRow, StatsMatrix,
};
use litref_core::similarity::{histogram, read_scored, score_stream, write_scored, Thresholds};
use litref_core::split::{split, SplitSpec};
use litref_core::{Error, Result};
use serde::Serialize;

use super::{
    recipe_kind, BinArgs, BuildArgs, Command, EvalArgs, ExportArgs, IngestArgs, Kind, MetricArgs,
    MetricName, PipelineArgs, ReportCommand, ScoreArgs, SigtestArgs, SplitArgs, ThresholdArgs,
};

pub fn run(command: Command, config: &PipelineConfig) -> Result<()> {
    match command {
        Command::Ingest(a) => cmd_ingest(a, config),
        Command::Score(a) => cmd_score(a, config),
        Command::Bin(a) => cmd_bin(a, config),
        Command::Build(a) => cmd_build(a, config),
        Command::Split(a) => cmd_split(a, config),
        Command::Export(a) => cmd_export(a, config),
        Command::Eval(a) => cmd_eval(a, config),
        Command::Sigtest(a) => cmd_sigtest(a, config),
        Command::Report(r) => cmd_report(r, config),
        Command::Pipeline(a) => cmd_pipeline(a, config),
    }
}

fn with_path(path: &Path, e: io::Error) -> Error {
    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| with_path(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| with_path(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| with_path(path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Writes `<primary>.manifest.json` covering `inputs` and `outputs`.
fn manifest_for<P: Serialize>(
    command: &str,
    seed: Option<u64>,
    params: &P,
    inputs: &[&Path],
    outputs: &[&Path],
) -> Result<()> {
    let mut m = Manifest::new(command).with_parameters(params)?;
    m.seed = seed;
    for p in inputs {
        m.add_input(p, p.display().to_string())?;
    }
    for p in outputs {
        m.add_output(p, label(p))?;
    }
    m.write(&sidecar_path(outputs[0]))
}

fn load_refs(path: &Path) -> Result<Corpus> {
    Ok(ingest(path, false, None)?.0)
}

fn thresholds(args: &ThresholdArgs, config: &PipelineConfig) -> Result<Thresholds> {
    Thresholds::new(
        args.low_hi.unwrap_or(config.similarity.low_hi),
        args.med_hi.unwrap_or(config.similarity.med_hi),
    )
}

fn cmd_ingest(a: IngestArgs, config: &PipelineConfig) -> Result<()> {
    let word_limit = a.word_limit.or(config.input.word_limit);
    let (corpus, summary) = ingest(&a.corpus, a.lenient || config.input.lenient, word_limit)?;
    write_with(&a.out, |w| write_corpus(&corpus, w))?;
    tracing::info!(
        "{} groups loaded, {} skipped, {} over the word limit, {} kept",
        summary.loaded,
        summary.skipped.len(),
        summary.over_word_limit,
        summary.kept
    );
    #[derive(Serialize)]
    struct Params {
        lenient: bool,
        word_limit: Option<usize>,
        loaded: usize,
        skipped: usize,
        kept: usize,
    }
    let params = Params {
        lenient: a.lenient || config.input.lenient,
        word_limit,
        loaded: summary.loaded,
        skipped: summary.skipped.len(),
        kept: summary.kept,
    };
    manifest_for("ingest", None, &params, &[&a.corpus], &[&a.out])
}

fn cmd_score(a: ScoreArgs, config: &PipelineConfig) -> Result<()> {
    let t = thresholds(&a.thresholds, config)?;
    let strict = config.similarity.strict_import && !a.lenient_import;
    let inputs = ScoringInputs::load(a.embeddings.as_deref(), a.scores.as_deref(), t, strict)?;
    let scorer = inputs.group_scorer();

    let scored = if inputs.imported.is_some() {
        // Imported ids have to be checked against the whole corpus.
        let corpus = load_refs(&a.corpus)?;
        inputs.check_known(&corpus)?;
        let table = scorer.score_all(corpus.groups())?;
        write_with(&a.out, |w| write_scored(&table, w))?;
        table.len()
    } else {
        let mut out = create(&a.out)?;
        let summary = score_stream(open(&a.corpus)?, &mut out, &scorer, a.chunk)?;
        tracing::info!(
            "{} groups read, {} scored, {} single-reference",
            summary.groups,
            summary.scored,
            summary.single_reference
        );
        summary.scored
    };

    #[derive(Serialize)]
    struct Params {
        thresholds: Thresholds,
        strict_import: bool,
        scorer: Option<String>,
        scored: usize,
    }
    let params = Params {
        thresholds: t,
        strict_import: strict,
        scorer: inputs.scorer.as_ref().map(|s| {
            use litref_core::SimilarityScorer;
            s.name().to_string()
        }),
        scored,
    };
    let mut ins: Vec<&Path> = vec![&a.corpus];
    ins.extend(a.embeddings.as_deref());
    ins.extend(a.scores.as_deref());
    manifest_for("score", None, &params, &ins, &[&a.out])
}

fn cmd_bin(a: BinArgs, config: &PipelineConfig) -> Result<()> {
    let t = thresholds(&a.thresholds, config)?;
    let mut table = read_scored(open(&a.scored)?)?;
    table.rebin(&t)?;
    write_with(&a.out, |w| write_scored(&table, w))?;
    manifest_for("bin", None, &t, &[&a.scored], &[&a.out])
}

fn cmd_build(a: BuildArgs, config: &PipelineConfig) -> Result<()> {
    let (kind, implied_bin) = recipe_kind(a.kind);
    if let (Some(implied), Some(given)) = (implied_bin, a.bin) {
        if implied != given {
            return Err(Error::InvalidParameter(format!(
                "--kind medium conflicts with --bin {given}"
            )));
        }
    }
    if matches!(a.kind, Kind::MediumPlus) && a.steps.is_none() {
        return Err(Error::InvalidParameter("--kind medium_plus needs --steps".into()));
    }
    let entry = DatasetEntry {
        name: "cli".into(),
        kind,
        n_source: a.n_source,
        bin: a.bin.or(implied_bin),
        add_bin: a.add_bin,
        steps: a.steps,
        subcategory: a.subcategory,
        seed: a.seed,
        shuffle_seed: a.shuffle_seed,
    };
    let spec = entry.spec(config.seed).map_err(|e| match e {
        Error::Config(m) => Error::InvalidParameter(m.replace("dataset `cli`: ", "")),
        other => other,
    })?;
    let corpus = load_refs(&a.corpus)?;
    let scores = read_scored(open(&a.scored)?)?;
    let dataset = spec.build(&corpus, &scores)?;
    write_with(&a.out, |w| litref_core::export::export_pairs(&dataset, w))?;
    tracing::info!(
        "{} sources, {} instances",
        dataset.num_source(),
        dataset.num_instance()
    );

    #[derive(Serialize)]
    struct Params<'a> {
        spec: &'a litref_core::DatasetSpec,
        num_source: usize,
        num_instance: usize,
    }
    let params = Params {
        spec: &spec,
        num_source: dataset.num_source(),
        num_instance: dataset.num_instance(),
    };
    manifest_for("build", Some(spec.seed), &params, &[&a.corpus, &a.scored], &[&a.out])
}

fn cmd_split(a: SplitArgs, config: &PipelineConfig) -> Result<()> {
    let base = config.split_spec();
    let spec = SplitSpec {
        train_fraction: a.train_fraction.unwrap_or(base.train_fraction),
        val_test_ratio: a.val_test_ratio.unwrap_or(base.val_test_ratio),
        ratio_tolerance: a.ratio_tolerance.unwrap_or(base.ratio_tolerance),
        seed: a.seed.unwrap_or(base.seed),
    };
    spec.validate()?;
    let corpus = load_refs(&a.corpus)?;
    let scores = read_scored(open(&a.scored)?)?;
    let result = split(&corpus, &scores, &spec)?;
    let mut out = OutputTree::new(&a.out_dir)?;
    write_split(&mut out, "", &result, &corpus, &scores, &spec)?;

    let mut m = Manifest::new("split").with_seed(spec.seed).with_parameters(&spec)?;
    m.add_input(&a.corpus, a.corpus.display().to_string())?;
    m.add_input(&a.scored, a.scored.display().to_string())?;
    out.record(&mut m)?;
    m.write(&a.out_dir.join(RUN_MANIFEST))
}

fn cmd_export(a: ExportArgs, config: &PipelineConfig) -> Result<()> {
    let instances = load_pairs(open(&a.dataset)?)?;
    let options = PromptOptions {
        delimiter: a.delimiter.unwrap_or_else(|| config.export.delimiter.clone()),
        include_language_tag: a.language_tag || config.export.include_language_tag,
    };
    let format = a.format.into();
    write_with(&a.out, |w| litref_core::export::export(&instances, format, &options, w))?;

    #[derive(Serialize)]
    struct Params {
        format: litref_core::ExportFormat,
        options: PromptOptions,
        instances: usize,
    }
    let params = Params {
        format,
        options,
        instances: instances.len(),
    };
    manifest_for("export", None, &params, &[&a.dataset], &[&a.out])
}

fn metric_config(args: &MetricArgs, config: &PipelineConfig) -> MetricConfig {
    let mut m = config.metrics;
    if let Some(n) = args.max_order {
        m.bleu.max_order = n;
    }
    m.bleu.lowercase |= args.lowercase;
    m
}

fn text_metric(name: MetricName, cfg: &MetricConfig) -> Result<Box<dyn CorpusMetric>> {
    Ok(match name {
        MetricName::Bleu => Box::new(Bleu::new(cfg.bleu)?),
        MetricName::Chrfpp => Box::new(Chrf::new(cfg.chrfpp)?),
        MetricName::External => unreachable!("external scores have no text metric"),
    })
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_with(path, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")?;
            Ok(())
        }),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            serde_json::to_writer_pretty(&mut lock, value)?;
            lock.write_all(b"\n")?;
            Ok(())
        }
    }
}

fn languages(refs: &Corpus) -> BTreeMap<String, String> {
    refs.iter()
        .map(|g| (g.group_id.clone(), g.language.clone()))
        .collect()
}

fn cmd_eval(a: EvalArgs, config: &PipelineConfig) -> Result<()> {
    let refs = load_refs(&a.refs)?;
    let mcfg = metric_config(&a.metric_args, config);
    let (report, input): (MetricReport, &Path) = match a.metric {
        MetricName::External => {
            let path = a.external_scores.as_deref().ok_or_else(|| {
                Error::InvalidParameter("--metric external needs --external-scores".into())
            })?;
            let rows = read_external_scores(open(path)?)?;
            (
                average_external_scores("external", &rows, &languages(&refs), a.per_segment)?,
                path,
            )
        }
        name => {
            let hyp = a
                .hyp
                .as_deref()
                .ok_or_else(|| Error::InvalidParameter(format!("--metric {name:?} needs --hyp")))?;
            let metric = text_metric(name, &mcfg)?;
            (evaluate_stream(metric.as_ref(), open(hyp)?, &refs, a.per_segment)?, hyp)
        }
    };
    emit_json(&report, a.out.as_deref())?;
    if let Some(out) = &a.out {
        manifest_for("eval", None, &mcfg, &[&a.refs, input], &[out])?;
    }
    Ok(())
}

fn system_name(path: &Path) -> String {
    path.display().to_string()
}

fn print_table(rows: &[GridRow], baseline: &str) -> Result<()> {
    let stdout = io::stdout();
    let mut w = stdout.lock();
    writeln!(w, "baseline: {baseline}")?;
    let width = rows.iter().map(|r| r.system.len()).max().unwrap_or(6).max(6);
    writeln!(
        w,
        "{:<width$}  {:<8}  {:>10}  {:>10}  {:>8}  {:>8}  significant",
        "system", "metric", "baseline", "system", "delta", "p_value"
    )?;
    for r in rows {
        let res = &r.result;
        writeln!(
            w,
            "{:<width$}  {:<8}  {:>10.4}  {:>10.4}  {:>8.4}  {:>8.4}  {}",
            r.system,
            r.metric,
            res.baseline_score,
            res.system_score,
            res.system_score - res.baseline_score,
            res.p_value,
            if res.significant { "yes" } else { "no" }
        )?;
    }
    Ok(())
}

fn cmd_sigtest(a: SigtestArgs, config: &PipelineConfig) -> Result<()> {
    let base = config.bootstrap_config();
    let bcfg = BootstrapConfig {
        resamples: a.resamples.unwrap_or(base.resamples),
        sample_fraction: a.sample_fraction.unwrap_or(base.sample_fraction),
        seed: a.seed.unwrap_or(base.seed),
        alpha: a.alpha.unwrap_or(base.alpha),
    };
    bcfg.validate()?;
    let refs = load_refs(&a.refs)?;
    let baseline = system_name(&a.baseline);
    let mut metrics = a.metric.clone();
    metrics.dedup();

    let rows = if metrics.contains(&MetricName::External) {
        if metrics.len() > 1 {
            return Err(Error::InvalidParameter(
                "--metric external cannot be combined with text metrics".into(),
            ));
        }
        let ids: Vec<&str> = refs.iter().map(|g| g.group_id.as_str()).collect();
        let load = |p: &Path| -> Result<StatsMatrix> {
            let rows = read_external_scores(open(p)?)?;
            Ok(StatsMatrix::from_scalars(&segment_means(&rows, &ids)?))
        };
        let base_stats = load(&a.baseline)?;
        let agg = MeanScore::new("external");
        a.system
            .iter()
            .map(|p| {
                Ok(GridRow {
                    system: system_name(p),
                    metric: "external".into(),
                    result: paired_bootstrap_stats(&agg, &base_stats, &load(p)?, &bcfg)?,
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let mcfg = metric_config(&a.metric_args, config);
        let load = |p: &Path| -> Result<Vec<SegmentEval>> {
            join_segments(&read_hypotheses(open(p)?)?, &refs)
        };
        let mut systems = vec![(baseline.clone(), load(&a.baseline)?)];
        for p in &a.system {
            let name = system_name(p);
            if systems.iter().any(|(n, _)| *n == name) {
                return Err(Error::InvalidParameter(format!("system `{name}` given twice")));
            }
            systems.push((name, load(p)?));
        }
        let boxed: Vec<Box<dyn CorpusMetric>> = metrics
            .iter()
            .map(|&m| text_metric(m, &mcfg))
            .collect::<Result<_>>()?;
        let refs: Vec<&dyn CorpusMetric> = boxed.iter().map(|m| m.as_ref()).collect();
        significance_grid(&baseline, &systems, &refs, &bcfg)?
    };

    print_table(&rows, &baseline)?;
    if let Some(out) = &a.out {
        emit_json(&rows, Some(out))?;
        let mut ins: Vec<&Path> = vec![&a.refs, &a.baseline];
        ins.extend(a.system.iter().map(PathBuf::as_path));
        manifest_for("sigtest", Some(bcfg.seed), &bcfg, &ins, &[out])?;
    }
    Ok(())
}

fn cmd_report(r: ReportCommand, config: &PipelineConfig) -> Result<()> {
    match r {
        ReportCommand::Composition {
            dataset,
            corpus,
            out,
        } => {
            let instances = load_pairs(open(&dataset)?)?;
            let refs = load_refs(&corpus)?;
            let rows = composition_report(&instances, &refs)?;
            write_with(&out, |w| write_composition_csv(&rows, w))?;
            manifest_for("report composition", None, &(), &[&dataset, &corpus], &[&out])
        }
        ReportCommand::Histogram {
            scored,
            bin_width,
            out,
            svg,
            thresholds: targs,
        } => {
            let width = bin_width.unwrap_or(config.similarity.histogram_bin_width);
            let table = read_scored(open(&scored)?)?;
            let bins = histogram(table.iter().map(|g| g.sim_p), width)?;
            write_with(&out, |w| write_histogram_csv(&bins, w))?;
            let mut outs: Vec<&Path> = vec![&out];
            if let Some(svg) = &svg {
                let t = thresholds(&targs, config)?;
                write_with(svg, |w| Ok(w.write_all(histogram_svg(&bins, &t).as_bytes())?))?;
                outs.push(svg);
            }
            manifest_for("report histogram", None, &width, &[&scored], &outs)
        }
        ReportCommand::Gain { a, b, out } => {
            let read = |p: &Path| -> Result<MetricReport> { Ok(serde_json::from_reader(open(p)?)?) };
            let gain = per_language_gain(&read(&a)?, &read(&b)?)?;
            write_with(&out, |w| write_gain_csv(&gain, w))?;
            manifest_for("report gain", None, &gain.metric, &[&a, &b], &[&out])
        }
        ReportCommand::Stats { corpus, out } => {
            let stats = corpus_stats(&load_refs(&corpus)?);
            emit_json(&stats, Some(&out))?;
            manifest_for("report stats", None, &(), &[&corpus], &[&out])
        }
    }
}

fn cmd_pipeline(a: PipelineArgs, config: &PipelineConfig) -> Result<()> {
    let mut config = config.clone();
    if let Some(dir) = a.out_dir {
        config.output.dir = std::env::current_dir()?.join(dir);
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let summary = pipeline_all(&config).map_err(|e| {
        tracing::error!("stage `{}` failed", e.stage);
        e.error
    })?;
    for d in &summary.datasets {
        tracing::info!("{}: {} sources, {} instances", d.name, d.num_source, d.num_instance);
    }
    eprintln!(
        "{} groups, {} scored, {} datasets, {} files in {}",
        summary.groups,
        summary.scored,
        summary.datasets.len(),
        summary.outputs.len() + 1,
        config.resolve(&config.output.dir).display()
    );
    Ok(())
}
