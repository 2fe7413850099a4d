//! Paired bootstrap resampling between a baseline and a system.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Aggregate, CorpusMetric, SegmentEval};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub sample_fraction: f64,
    pub seed: u64,
    pub alpha: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: 1000,
            sample_fraction: 1.0,
            seed: 0,
            alpha: 0.01,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resamples == 0 {
            return Err(Error::invalid("resamples must be at least 1"));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "sample_fraction must be in (0, 1], got {}",
                self.sample_fraction
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    /// Segments drawn per resample.
    pub fn sample_size(&self, segments: usize) -> usize {
        ((self.sample_fraction * segments as f64 - 1e-9).ceil() as usize).clamp(1, segments.max(1))
    }
}

/// How resamples with equal scores are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Ties count as failures of the system: `p = (baseline wins + ties) / R`.
    AgainstSystem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub metric: String,
    pub baseline_score: f64,
    pub system_score: f64,
    pub wins_baseline: usize,
    pub wins_system: usize,
    pub ties: usize,
    pub p_value: f64,
    pub significant: bool,
    pub tie_policy: TiePolicy,
    pub config: BootstrapConfig,
}

/// Row-major segment statistics for one system under one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsMatrix {
    width: usize,
    data: Vec<f64>,
}

impl StatsMatrix {
    pub fn compute(metric: &dyn CorpusMetric, segments: &[SegmentEval]) -> Self {
        let rows: Vec<Vec<f64>> = segments.par_iter().map(|s| metric.segment_stats(s)).collect();
        StatsMatrix {
            width: metric.width(),
            data: rows.into_iter().flatten().collect(),
        }
    }

    /// One scalar per segment, for use with [`crate::metrics::MeanScore`].
    pub fn from_scalars(values: &[f64]) -> Self {
        StatsMatrix {
            width: 1,
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    fn totals(&self, idx: impl Iterator<Item = usize>) -> Vec<f64> {
        let mut t = vec![0.0; self.width];
        for i in idx {
            crate::metrics::add(&mut t, self.row(i));
        }
        t
    }
}

/// Bootstrap on precomputed statistics. Row `i` of both matrices must be
/// the same segment. Resample `i` draws from `rng::stream(seed, i)`, so the
/// outcome does not depend on the thread count.
pub fn paired_bootstrap_stats(
    metric: &dyn Aggregate,
    baseline: &StatsMatrix,
    system: &StatsMatrix,
    config: &BootstrapConfig,
) -> Result<SignificanceResult> {
    config.validate()?;
    let n = baseline.rows();
    if n == 0 {
        return Err(Error::NoSegments);
    }
    if system.rows() != n || baseline.width() != system.width() || baseline.width() != metric.width() {
        return Err(Error::SegmentMismatch(format!(
            "baseline has {n} segments, system has {}",
            system.rows()
        )));
    }
    let m = config.sample_size(n);
    let outcomes: Vec<std::cmp::Ordering> = (0..config.resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(config.seed, i as u64);
            let idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
            let b = metric.score(&baseline.totals(idx.iter().copied()), m);
            let s = metric.score(&system.totals(idx.iter().copied()), m);
            s.partial_cmp(&b).unwrap_or(std::cmp::Ordering::Equal)
        })
        .collect();

    let wins_system = outcomes.iter().filter(|o| o.is_gt()).count();
    let wins_baseline = outcomes.iter().filter(|o| o.is_lt()).count();
    let ties = outcomes.len() - wins_system - wins_baseline;
    let p_value = (wins_baseline + ties) as f64 / config.resamples as f64;
    Ok(SignificanceResult {
        metric: metric.name().to_string(),
        baseline_score: metric.score(&baseline.totals(0..n), n),
        system_score: metric.score(&system.totals(0..n), n),
        wins_baseline,
        wins_system,
        ties,
        p_value,
        significant: p_value < config.alpha,
        tie_policy: TiePolicy::AgainstSystem,
        config: *config,
    })
}

fn check_aligned(baseline: &[SegmentEval], system: &[SegmentEval]) -> Result<()> {
    if baseline.len() != system.len() {
        return Err(Error::SegmentMismatch(format!(
            "baseline has {} segments, system has {}",
            baseline.len(),
            system.len()
        )));
    }
    if let Some((b, s)) = baseline
        .iter()
        .zip(system)
        .find(|(b, s)| b.segment_id != s.segment_id)
    {
        return Err(Error::SegmentMismatch(format!(
            "segment `{}` paired with `{}`",
            b.segment_id, s.segment_id
        )));
    }
    Ok(())
}

pub fn paired_bootstrap(
    metric: &dyn CorpusMetric,
    baseline: &[SegmentEval],
    system: &[SegmentEval],
    config: &BootstrapConfig,
) -> Result<SignificanceResult> {
    check_aligned(baseline, system)?;
    paired_bootstrap_stats(
        metric,
        &StatsMatrix::compute(metric, baseline),
        &StatsMatrix::compute(metric, system),
        config,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub system: String,
    pub metric: String,
    pub result: SignificanceResult,
}

/// Tests every non-baseline system against `baseline` under every metric.
pub fn significance_grid(
    baseline: &str,
    systems: &[(String, Vec<SegmentEval>)],
    metrics: &[&dyn CorpusMetric],
    config: &BootstrapConfig,
) -> Result<Vec<GridRow>> {
    config.validate()?;
    let base = systems
        .iter()
        .find(|(name, _)| name == baseline)
        .ok_or_else(|| Error::UnknownSystem(baseline.to_string()))?;
    for (_, segs) in systems {
        check_aligned(&base.1, segs)?;
    }
    let mut rows = Vec::new();
    for &metric in metrics {
        let base_stats = StatsMatrix::compute(metric, &base.1);
        for (name, segs) in systems.iter().filter(|(name, _)| name != baseline) {
            let result =
                paired_bootstrap_stats(metric, &base_stats, &StatsMatrix::compute(metric, segs), config)?;
            rows.push(GridRow {
                system: name.clone(),
                metric: metric.name().to_string(),
                result,
            });
        }
    }
    Ok(rows)
}
