//! Dataset files and tabular/graphic reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::dataset::{Dataset, TrainingInstance};
use crate::error::{Error, Result};
use crate::metrics::GainReport;
use crate::similarity::{HistogramBin, Thresholds};

pub const PROMPT_DELIMITER: &str = " ###> ";
pub const COMPOSITION_CSV_HEADER: &str = "language,books,src,total,pct_used";
pub const HISTOGRAM_CSV_HEADER: &str = "lower_edge,count";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    PairRecords,
    PromptLines,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromptOptions {
    pub delimiter: String,
    /// Prefix each source with `[language] `.
    pub include_language_tag: bool,
}

impl Default for PromptOptions {
    fn default() -> Self {
        PromptOptions {
            delimiter: PROMPT_DELIMITER.to_string(),
            include_language_tag: false,
        }
    }
}

/// One line of a pair-records file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub source: String,
    pub target: String,
    pub language: String,
    pub group_id: String,
    pub ref_id: String,
}

impl From<&TrainingInstance> for PairRecord {
    fn from(i: &TrainingInstance) -> Self {
        PairRecord {
            source: i.source_text.clone(),
            target: i.target_text.clone(),
            language: i.language.clone(),
            group_id: i.group_id.clone(),
            ref_id: i.ref_id.clone(),
        }
    }
}

impl From<PairRecord> for TrainingInstance {
    fn from(r: PairRecord) -> Self {
        TrainingInstance {
            group_id: r.group_id,
            ref_id: r.ref_id,
            language: r.language,
            source_text: r.source,
            target_text: r.target,
        }
    }
}

pub fn export_pairs<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    write_pairs(dataset.instances(), out)
}

pub fn write_pairs<W: Write>(instances: &[TrainingInstance], mut out: W) -> Result<()> {
    if instances.is_empty() {
        tracing::warn!("exporting an empty dataset");
    }
    for inst in instances {
        serde_json::to_writer(&mut out, &PairRecord::from(inst))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_pairs<R: BufRead>(input: R) -> Result<Vec<TrainingInstance>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PairRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        out.push(rec.into());
    }
    Ok(out)
}

fn escape_newlines(text: &str) -> String {
    text.replace("\r\n", "\\n").replace(['\n', '\r'], "\\n")
}

/// Formats one instance as `<source><delimiter><target>`.
pub fn prompt_line(inst: &TrainingInstance, options: &PromptOptions) -> Result<String> {
    let mut source = escape_newlines(&inst.source_text);
    if options.include_language_tag {
        source = format!("[{}] {source}", inst.language);
    }
    let target = escape_newlines(&inst.target_text);
    let line = format!("{source}{}{target}", options.delimiter);
    // The delimiter must occur once, at the boundary. Checking the joined
    // line also catches a source ending in a prefix of the delimiter.
    if line.find(&options.delimiter) != Some(source.len())
        || line.rfind(&options.delimiter) != Some(source.len())
    {
        return Err(Error::DelimiterCollision {
            group_id: inst.group_id.clone(),
            ref_id: inst.ref_id.clone(),
            delimiter: options.delimiter.clone(),
        });
    }
    Ok(line)
}

pub fn export_prompt_lines<W: Write>(
    dataset: &Dataset,
    options: &PromptOptions,
    out: W,
) -> Result<()> {
    write_prompt_lines(dataset.instances(), options, out)
}

pub fn write_prompt_lines<W: Write>(
    instances: &[TrainingInstance],
    options: &PromptOptions,
    mut out: W,
) -> Result<()> {
    if options.delimiter.is_empty() {
        return Err(Error::invalid("prompt delimiter must not be empty"));
    }
    if instances.is_empty() {
        tracing::warn!("exporting an empty dataset");
    }
    for inst in instances {
        let line = prompt_line(inst, options)?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn export<W: Write>(
    instances: &[TrainingInstance],
    format: ExportFormat,
    options: &PromptOptions,
    out: W,
) -> Result<()> {
    match format {
        ExportFormat::PairRecords => write_pairs(instances, out),
        ExportFormat::PromptLines => write_prompt_lines(instances, options, out),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionRow {
    pub language: String,
    pub books: usize,
    pub src: usize,
    pub total: usize,
    pub pct_used: f64,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Per-language share of corpus groups used by `instances`, sorted by
/// `src` ascending. Repetition-augmented groups count as their origin.
pub fn composition_report(
    instances: &[TrainingInstance],
    corpus: &Corpus,
) -> Result<Vec<CompositionRow>> {
    let mut used: BTreeMap<&str, (BTreeSet<&str>, BTreeSet<&str>)> = BTreeMap::new();
    let mut totals: BTreeMap<&str, usize> = BTreeMap::new();
    for g in corpus {
        *totals.entry(g.language.as_str()).or_default() += 1;
    }
    for inst in instances {
        let gid = inst.origin_group_id();
        let g = corpus.get(gid).ok_or_else(|| Error::UnknownGroup(gid.to_string()))?;
        let e = used.entry(g.language.as_str()).or_default();
        e.0.insert(g.group_id.as_str());
        e.1.insert(g.book_id.as_str());
    }
    let mut rows: Vec<CompositionRow> = totals
        .into_iter()
        .map(|(lang, total)| {
            let (src, books) = used
                .get(lang)
                .map(|(groups, books)| (groups.len(), books.len()))
                .unwrap_or((0, 0));
            CompositionRow {
                language: lang.to_string(),
                books,
                src,
                total,
                pct_used: round2(src as f64 / total as f64),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.src.cmp(&b.src).then_with(|| a.language.cmp(&b.language)));
    Ok(rows)
}

pub fn write_composition_csv<W: Write>(rows: &[CompositionRow], mut out: W) -> Result<()> {
    writeln!(out, "{COMPOSITION_CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{:.2}", csv_field(&r.language), r.books, r.src, r.total, r.pct_used)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], mut out: W) -> Result<()> {
    writeln!(out, "{HISTOGRAM_CSV_HEADER}")?;
    for b in bins {
        writeln!(out, "{},{}", b.lower_edge, b.count)?;
    }
    out.flush()?;
    Ok(())
}

/// Chart geometry shared by the renderer and its tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartLayout {
    pub width: f64,
    pub height: f64,
    pub left: f64,
    pub top: f64,
    pub plot_width: f64,
    pub plot_height: f64,
}

impl Default for ChartLayout {
    fn default() -> Self {
        ChartLayout {
            width: 600.0,
            height: 300.0,
            left: 50.0,
            top: 20.0,
            plot_width: 500.0,
            plot_height: 240.0,
        }
    }
}

impl ChartLayout {
    /// Maps a score in `[-1, 1]` to an x coordinate.
    pub fn x(&self, score: f64) -> f64 {
        self.left + (score + 1.0) / 2.0 * self.plot_width
    }

    pub fn baseline(&self) -> f64 {
        self.top + self.plot_height
    }
}

/// Bar chart of a histogram with the two bin thresholds as vertical rules.
pub fn histogram_svg(bins: &[HistogramBin], thresholds: &Thresholds) -> String {
    let l = ChartLayout::default();
    let max = bins.iter().map(|b| b.count).max().unwrap_or(0).max(1) as f64;
    let width = if bins.is_empty() { 2.0 } else { 2.0 / bins.len() as f64 };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        l.width, l.height, l.width, l.height
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        l.x(-1.0),
        l.baseline(),
        l.x(1.0),
        l.baseline()
    );
    for b in bins {
        let h = b.count as f64 / max * l.plot_height;
        let x0 = l.x(b.lower_edge);
        let x1 = l.x((b.lower_edge + width).min(1.0));
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4c72b0"><title>{}: {}</title></rect>"##,
            x0,
            l.baseline() - h,
            (x1 - x0).max(0.0),
            h,
            b.lower_edge,
            b.count
        );
    }
    for (value, colour) in [(thresholds.low_hi, "red"), (thresholds.med_hi, "blue")] {
        let _ = writeln!(
            svg,
            r#"<line class="threshold" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{colour}"/>"#,
            l.top,
            l.baseline(),
            x = l.x(value)
        );
    }
    for tick in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{tick}</text>"#,
            l.x(tick),
            l.baseline() + 14.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_gain_csv<W: Write>(gain: &GainReport, mut out: W) -> Result<()> {
    writeln!(out, "language,gain")?;
    for (lang, g) in &gain.per_language {
        writeln!(out, "{},{g}", csv_field(lang))?;
    }
    writeln!(out, "overall,{}", gain.overall)?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::group;
    use crate::dataset::{DatasetSpec, Recipe};
    use crate::similarity::histogram;
    use proptest::prelude::*;

    fn inst(gid: &str, src: &str, tgt: &str) -> TrainingInstance {
        TrainingInstance {
            group_id: gid.into(),
            ref_id: "r1".into(),
            language: "fr".into(),
            source_text: src.into(),
            target_text: tgt.into(),
        }
    }

    fn dataset(instances: Vec<TrainingInstance>) -> Dataset {
        Dataset::new(DatasetSpec::new(Recipe::Unfiltered { n_source: None }, 0), instances)
    }

    #[test]
    fn prompt_line_format() {
        let opts = PromptOptions::default();
        assert_eq!(prompt_line(&inst("g", "Bonjour.", "Hello."), &opts).unwrap(), "Bonjour. ###> Hello.");
        assert_eq!(prompt_line(&inst("g", "a\nb", "c\r\nd"), &opts).unwrap(), "a\\nb ###> c\\nd");
        let tagged = PromptOptions { include_language_tag: true, ..opts.clone() };
        assert_eq!(prompt_line(&inst("g", "x", "y"), &tagged).unwrap(), "[fr] x ###> y");
    }

    #[test]
    fn delimiter_collisions() {
        let opts = PromptOptions::default();
        for (s, t) in [("a", "b ###> c"), ("a ###> b", "c"), ("a ###>", "b"), ("a", "###> b")] {
            assert!(
                matches!(prompt_line(&inst("g7", s, t), &opts), Err(Error::DelimiterCollision { ref group_id, .. }) if group_id == "g7"),
                "{s:?} / {t:?}"
            );
        }
    }

    #[test]
    fn pair_records_round_trip_in_order() {
        let d = dataset(vec![inst("b", "s1", "t1"), inst("a", "s2", "t\n2")]);
        let mut buf = Vec::new();
        export_pairs(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with(r#"{"source":"s1","target":"t1","language":"fr","group_id":"b","ref_id":"r1"}"#));
        assert_eq!(load_pairs(&buf[..]).unwrap(), d.instances());

        let mut empty = Vec::new();
        export_pairs(&dataset(vec![]), &mut empty).unwrap();
        assert!(empty.is_empty());

        let mut lines = Vec::new();
        export_prompt_lines(&d, &PromptOptions::default(), &mut lines).unwrap();
        assert_eq!(String::from_utf8(lines).unwrap(), "s1 ###> t1\ns2 ###> t\\n2\n");
    }

    #[test]
    fn composition_rows() {
        let mut groups: Vec<_> = (0..3261)
            .map(|i| group(&format!("pt{i}"), "pt", &format!("b{}", i % 4), &["x"]))
            .collect();
        groups.push(group("de0", "de", "d", &["x"]));
        groups.push(group("sv0", "sv", "s", &["x"]));
        groups.push(group("sv1", "sv", "s", &["x"]));
        let corpus = Corpus::new(groups).unwrap();
        let mut used: Vec<_> = (0..1021).map(|i| inst(&format!("pt{i}"), "s", "t")).collect();
        used.push(inst("sv0", "s", "t"));
        used.push(inst("sv1", "s", "t"));
        used.push(inst("sv1#rep", "s", "t"));
        let rows = composition_report(&used, &corpus).unwrap();
        assert_eq!(rows.iter().map(|r| r.language.as_str()).collect::<Vec<_>>(), ["de", "sv", "pt"]);
        assert_eq!(rows[0].src, 0);
        assert_eq!(rows[0].pct_used, 0.0);
        assert_eq!((rows[1].src, rows[1].pct_used), (2, 1.0));
        assert_eq!((rows[2].books, rows[2].src, rows[2].total, rows[2].pct_used), (4, 1021, 3261, 0.31));

        let mut buf = Vec::new();
        write_composition_csv(&rows, &mut buf).unwrap();
        let csv = String::from_utf8(buf).unwrap();
        assert!(csv.starts_with("language,books,src,total,pct_used\nde,0,0,1,0.00\nsv,1,2,2,1.00\n"));
        assert!(csv.ends_with("pt,4,1021,3261,0.31\n"));
        assert!(composition_report(&[inst("zz", "s", "t")], &corpus).is_err());
    }

    #[test]
    fn histogram_outputs() {
        let bins = histogram([-1.0, 0.5, 0.5, 1.0], 0.5).unwrap();
        let mut buf = Vec::new();
        write_histogram_csv(&bins, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "lower_edge,count\n-1,1\n-0.5,0\n0,0\n0.5,3\n");

        let empty = histogram(std::iter::empty(), 0.5).unwrap();
        assert!(empty.iter().all(|b| b.count == 0));

        // x = 50 + (s + 1) / 2 * 500
        let svg = histogram_svg(&bins, &Thresholds::default());
        assert!(svg.contains(r#"class="threshold" x1="412.50""#));
        assert!(svg.contains(r#"class="threshold" x1="512.50""#));
        assert_eq!(svg.matches("<rect").count(), 4);
    }

    proptest! {
        #[test]
        fn pct_used_in_unit_interval(take in proptest::collection::vec(any::<bool>(), 1..40)) {
            let groups: Vec<_> = (0..take.len())
                .map(|i| group(&format!("g{i}"), if i % 3 == 0 { "a" } else { "b" }, "k", &["x"]))
                .collect();
            let corpus = Corpus::new(groups).unwrap();
            let used: Vec<_> = take.iter().enumerate().filter(|(_, t)| **t)
                .map(|(i, _)| inst(&format!("g{i}"), "s", "t")).collect();
            let rows = composition_report(&used, &corpus).unwrap();
            prop_assert_eq!(rows.iter().map(|r| r.src).sum::<usize>(), used.len());
            prop_assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.pct_used)));
        }
    }
}
