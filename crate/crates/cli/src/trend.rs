//! Trends over the recorded iterates of a search.

use blab_core::extremal::{TraceEntry, NEAR_EXTREMAL_FRACTION};
use blab_core::{bellman_value, SearchReport};
use serde::Serialize;

use crate::artifact::{Cell, Table};
use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendSummary {
    pub bellman: f64,
    /// Iterates with `gap` at or below this count as near-extremal.
    pub threshold: f64,
    pub iterates: usize,
    pub near_extremal: usize,
    pub first_crossing: Option<usize>,
    pub first_dev: Option<f64>,
    pub final_dev: Option<f64>,
    pub first_levelset: Option<f64>,
    pub final_levelset: Option<f64>,
    /// Rank correlation of `gap` and the level-1 deviation over the whole trace.
    pub spearman_gap_dev: Option<f64>,
    pub localization_improves: bool,
    pub levelset_shrinks: bool,
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        order[i..=j].iter().for_each(|&k| out[k] = rank);
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; `None` for fewer than two points or a
/// constant series.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let mean = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean) * (a - mean);
        syy += (b - mean) * (b - mean);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

pub fn localization_trend(report: &SearchReport) -> CliResult<TrendSummary> {
    let bellman = bellman_value(&report.params)?;
    let threshold = NEAR_EXTREMAL_FRACTION * bellman;
    let trace = &report.trace;
    let near: Vec<&TraceEntry> = trace.iter().filter(|t| t.gap <= threshold).collect();
    let (first, last) = (near.first(), near.last());
    let gaps: Vec<f64> = trace.iter().map(|t| t.gap).collect();
    let devs: Vec<f64> = trace.iter().map(|t| t.level1_max_dev).collect();
    let pick = |e: Option<&&TraceEntry>, f: fn(&TraceEntry) -> f64| e.map(|t| f(t));
    let first_dev = pick(first, |t| t.level1_max_dev);
    let final_dev = pick(last, |t| t.level1_max_dev);
    let first_levelset = pick(first, |t| t.levelset_mass);
    let final_levelset = pick(last, |t| t.levelset_mass);
    let below = |a: Option<f64>, b: Option<f64>| matches!((a, b), (Some(a), Some(b)) if a < b);
    Ok(TrendSummary {
        bellman,
        threshold,
        iterates: trace.len(),
        near_extremal: near.len(),
        first_crossing: first.map(|t| t.iter),
        first_dev,
        final_dev,
        first_levelset,
        final_levelset,
        spearman_gap_dev: spearman(&gaps, &devs),
        localization_improves: below(final_dev, first_dev),
        levelset_shrinks: below(final_levelset, first_levelset),
    })
}

impl TrendSummary {
    pub fn record(&self) -> Table {
        let mut t = Table::new(vec![
            "bellman",
            "threshold",
            "iterates",
            "near_extremal",
            "first_crossing",
            "first_dev",
            "final_dev",
            "first_levelset",
            "final_levelset",
            "spearman_gap_dev",
            "localization_improves",
            "levelset_shrinks",
        ]);
        t.push(vec![
            self.bellman.into(),
            self.threshold.into(),
            self.iterates.into(),
            self.near_extremal.into(),
            self.first_crossing.into(),
            self.first_dev.into(),
            self.final_dev.into(),
            self.first_levelset.into(),
            self.final_levelset.into(),
            self.spearman_gap_dev.into(),
            self.localization_improves.into(),
            self.levelset_shrinks.into(),
        ]);
        t
    }
}

/// The trace itself, one row per iterate, flagged when near-extremal.
pub fn trace_table(report: &SearchReport, threshold: f64) -> Table {
    let mut t = Table::new(vec![
        "iter",
        "objective",
        "gap",
        "level1_max_dev",
        "levelset_mass",
        "slack_sum",
        "near_extremal",
    ]);
    for e in &report.trace {
        t.push(vec![
            Cell::Int(e.iter as u64),
            e.objective.into(),
            e.gap.into(),
            e.level1_max_dev.into(),
            e.levelset_mass.into(),
            e.slack_sum.into(),
            (e.gap <= threshold).into(),
        ]);
    }
    t
}
