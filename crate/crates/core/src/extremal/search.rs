//! Projected ascent with random restarts.
//!
//! Each restart draws a random positive shape on the shallowest tree that can
//! carry the target moments and projects it onto the moment constraints.
//! Then it repeats: estimate the gradient of the maximal energy by forward
//! differences, remove the components normal to the constraint surface, step,
//! re-project, and keep the step only if the energy went up. Rejected steps
//! halve the step length; accepted ones double it. Once the step collapses at
//! a kink, single subtrees are rescaled instead. The converged function is
//! copied one level down and the process continues until the full depth.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diagnostics::{level_max_deviation, level_set_mass};
use super::normalize::normalize_moments;
use super::{ExtremalCandidate, SearchConfig, CEILING_TOL, LEVEL_SET_REL_TOL};
use crate::bellman::{bellman_value, BellmanParams};
use crate::error::{Error, Result};
use crate::maximal::{chain_maxima, hoelder_slack, maximal_energy, node_averages, powp};
use crate::rng;
use crate::tree::{MeasureTree, NodeId, TreeFunction};

/// Below this step length the gradient phase hands over to subtree moves.
const STALL_STEP: f64 = 1e-9;
const SUBTREE_FACTORS: [f64; 8] = [2.0, 0.5, 1.5, 0.75, 1.2, 0.9, 1.05, 0.98];
const INIT_ATTEMPTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub f: f64,
    #[serde(rename = "F")]
    pub big_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestCandidate {
    pub leaf_values: Vec<f64>,
    pub moments: Moments,
    pub objective: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub objective: f64,
    pub gap: f64,
    pub level1_max_dev: f64,
    pub levelset_mass: f64,
    pub slack_sum: f64,
}

/// Everything a search produced; serializes to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub params: BellmanParams,
    pub config: SearchConfig,
    pub best: BestCandidate,
    /// Iterates of the winning restart.
    pub trace: Vec<TraceEntry>,
}

struct Restart {
    values: Vec<f64>,
    objective: f64,
    trace: Vec<TraceEntry>,
}

/// One depth of the coarse-to-fine ladder.
struct Level {
    tree: Arc<MeasureTree>,
    masses: Vec<f64>,
}

impl Level {
    fn new(arity: usize, depth: usize) -> Result<Self> {
        let tree = Arc::new(MeasureTree::uniform(arity, depth)?);
        let masses = tree.leaves().iter().map(|n| n.mass).collect();
        Ok(Level { tree, masses })
    }
}

struct Problem<'a> {
    params: &'a BellmanParams,
    config: &'a SearchConfig,
    bellman: f64,
    levels: Vec<Level>,
}

/// Shallowest depth whose leaves can carry the target `F / f^p`.
fn start_depth(params: &BellmanParams, arity: usize, depth: usize) -> usize {
    let target = params.big_f / powp(params.f, params.p);
    (0..depth)
        .find(|&d| {
            let reach = (arity as f64).powi(d as i32).powf(params.p - 1.0);
            if d == 0 {
                target <= 1.0
            } else {
                target < reach
            }
        })
        .unwrap_or(depth)
}

/// Copies every leaf value onto its children one level down; moments and
/// maximal energy are unchanged.
fn lift(values: &[f64], arity: usize) -> Vec<f64> {
    values.iter().flat_map(|v| std::iter::repeat_n(*v, arity)).collect()
}

impl Problem<'_> {
    fn energy(&self, level: &Level, values: &[f64]) -> f64 {
        maximal_energy(&level.tree, values, self.params.p)
    }

    fn project(&self, level: &Level, values: Vec<f64>) -> Result<Vec<f64>> {
        let phi = TreeFunction::new(Arc::clone(&level.tree), values)?;
        let BellmanParams { p, f, big_f } = *self.params;
        Ok(normalize_moments(&phi, p, f, big_f, self.config.tol_moments)?.into_values())
    }

    fn start(&self, level: &Level, restart: usize) -> Result<Vec<f64>> {
        let mut rng = rng::stream(self.config.seed, "restart", restart as u64);
        let n = level.tree.leaf_count();
        let mut last = Error::CannotNormalize("no start attempted".into());
        for attempt in 0..INIT_ATTEMPTS {
            let spread = 1.0 + 0.5 * attempt as f64;
            let raw: Vec<f64> = (0..n)
                .map(|_| (spread * rng.sample::<f64, _>(StandardNormal)).exp())
                .collect();
            match self.project(level, raw) {
                Ok(v) => return Ok(v),
                Err(e @ (Error::CannotNormalize(_) | Error::NumericFailure(_))) => last = e,
                Err(e) => return Err(e),
            }
        }
        Err(last)
    }

    /// Forward-difference gradient, rescaled to the `L²(μ)` metric.
    fn gradient(&self, level: &Level, values: &[f64], base: f64) -> Vec<f64> {
        let mut probe = values.to_vec();
        (0..values.len())
            .map(|i| {
                let h = 1e-6 * (1.0 + values[i].abs());
                probe[i] = values[i] + h;
                let g = (self.energy(level, &probe) - base) / h;
                probe[i] = values[i];
                g / level.masses[i]
            })
            .collect()
    }

    /// Removes the components of `g` along the constraint normals `1` and
    /// `x^{p−1}` in the `μ`-weighted inner product.
    fn tangent(&self, level: &Level, values: &[f64], mut g: Vec<f64>) -> Vec<f64> {
        let masses = &level.masses;
        let dot = |a: &[f64], b: &[f64]| -> f64 {
            masses.iter().zip(a).zip(b).map(|((m, x), y)| m * x * y).sum()
        };
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(2);
        for normal in [
            vec![1.0; values.len()],
            values.iter().map(|x| powp(*x, self.params.p - 1.0)).collect::<Vec<_>>(),
        ] {
            let mut v = normal;
            for b in &basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            let norm = dot(&v, &v).sqrt();
            if norm > 1e-14 {
                v.iter_mut().for_each(|x| *x /= norm);
                basis.push(v);
            }
        }
        for b in &basis {
            let c = dot(&g, b);
            g.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        g
    }

    fn record(&self, level: &Level, iter: usize, values: &[f64], objective: f64) -> Result<TraceEntry> {
        if objective > self.bellman + CEILING_TOL {
            return Err(Error::InvariantViolation(format!(
                "objective {objective} exceeds the Bellman value {} at iteration {iter}",
                self.bellman
            )));
        }
        let tree: &MeasureTree = &level.tree;
        let first = tree.depth().min(1);
        let avg = node_averages(tree, values);
        let maxima = chain_maxima(tree, &avg, tree.root());
        let phi = TreeFunction::new(Arc::clone(&level.tree), values.to_vec())?;
        let mut slack_sum = 0.0;
        for id in tree.level_nodes(first)? {
            match hoelder_slack(&phi, NodeId(id), self.params.p) {
                Ok(d) => slack_sum += d,
                Err(Error::DegenerateInput(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(TraceEntry {
            iter,
            objective,
            gap: self.bellman - objective,
            level1_max_dev: level_max_deviation(tree, &avg, self.params.f, first),
            levelset_mass: level_set_mass(tree, &maxima, self.params.f, LEVEL_SET_REL_TOL),
            slack_sum,
        })
    }

    /// Tries to improve `x` by rescaling the leaves under one node and
    /// re-projecting. Returns the improved point, if any.
    fn subtree_move(
        &self,
        level: &Level,
        x: &[f64],
        obj: f64,
        node: usize,
    ) -> Result<Option<(Vec<f64>, f64)>> {
        let range = level.tree.nodes()[node].leaves.clone();
        for factor in SUBTREE_FACTORS {
            let mut trial = x.to_vec();
            trial[range.clone()].iter_mut().for_each(|v| *v *= factor);
            match self.project(level, trial) {
                Ok(candidate) => {
                    let value = self.energy(level, &candidate);
                    if value > obj {
                        return Ok(Some((candidate, value)));
                    }
                }
                Err(Error::CannotNormalize(_) | Error::NumericFailure(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(None)
    }

    /// Projected ascent at one depth, appending to `trace`.
    ///
    /// Gradient steps run until the step length collapses; after that each
    /// iteration tries a subtree rescaling at the next node of a shuffled
    /// sweep, and any success hands control back to the gradient.
    fn ascend(
        &self,
        level: &Level,
        mut x: Vec<f64>,
        rng: &mut impl Rng,
        trace: &mut Vec<TraceEntry>,
    ) -> Result<(Vec<f64>, f64)> {
        let mut obj = self.energy(level, &x);
        let mut step = self.config.step_init;
        let mut direction: Option<Vec<f64>> = None;
        let mut iter = trace.last().map_or(0, |t| t.iter + 1);
        trace.push(self.record(level, iter, &x, obj)?);

        let internal = level.tree.node_count() - level.tree.leaf_count();
        let mut sweep: Vec<usize> = (1..level.tree.node_count()).collect();
        let mut cursor = sweep.len();
        let mut misses = 0;

        for _ in 0..self.config.max_iters {
            iter += 1;
            if step >= STALL_STEP {
                if direction.is_none() {
                    let g = self.gradient(level, &x, obj);
                    let d = self.tangent(level, &x, g);
                    let scale = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                    direction = (scale > 0.0 && scale.is_finite())
                        .then(|| d.into_iter().map(|v| v / scale).collect());
                }
                let accepted = match &direction {
                    None => None,
                    Some(d) => {
                        let shift = step * self.params.f;
                        let trial: Vec<f64> =
                            x.iter().zip(d).map(|(a, b)| (a + shift * b).max(0.0)).collect();
                        match self.project(level, trial) {
                            Ok(candidate) => {
                                let value = self.energy(level, &candidate);
                                (value > obj).then_some((candidate, value))
                            }
                            Err(Error::CannotNormalize(_) | Error::NumericFailure(_)) => None,
                            Err(e) => return Err(e),
                        }
                    }
                };
                match accepted {
                    Some((candidate, value)) => {
                        x = candidate;
                        obj = value;
                        step = (2.0 * step).min(1.0);
                        direction = None;
                    }
                    None if direction.is_none() => step = 0.0,
                    None => step *= 0.5,
                }
            } else {
                if internal == 0 && level.tree.leaf_count() == 1 {
                    break;
                }
                if cursor == sweep.len() {
                    sweep.shuffle(rng);
                    cursor = 0;
                }
                let node = sweep[cursor];
                cursor += 1;
                match self.subtree_move(level, &x, obj, node)? {
                    Some((candidate, value)) => {
                        x = candidate;
                        obj = value;
                        step = self.config.step_init;
                        direction = None;
                        misses = 0;
                    }
                    None => misses += 1,
                }
            }
            trace.push(self.record(level, iter, &x, obj)?);
            if misses >= sweep.len() {
                break;
            }
        }
        Ok((x, obj))
    }

    /// One restart: random start at the shallowest feasible depth, then
    /// ascend, lift, ascend, ... down to the configured depth.
    fn run(&self, restart: usize) -> Result<Restart> {
        let mut trace = Vec::new();
        let mut rng = rng::stream(self.config.seed, "moves", restart as u64);
        let mut levels = self.levels.iter();
        let first = levels.next().expect("at least one level");
        let x = self.start(first, restart)?;
        let (mut x, mut obj) = self.ascend(first, x, &mut rng, &mut trace)?;
        for level in levels {
            let lifted = self.project(level, lift(&x, self.config.arity))?;
            (x, obj) = self.ascend(level, lifted, &mut rng, &mut trace)?;
        }
        Ok(Restart { values: x, objective: obj, trace })
    }
}

/// Best of `config.restarts` projected-ascent runs on the uniform tree of
/// the configured arity and depth.
///
/// Each restart starts at the shallowest depth that can carry the target
/// moments and refines one level at a time, spending up to
/// `config.max_iters` iterations per level. Restart `r` at depth `m + 1`
/// continues exactly where restart `r` at depth `m` stopped, so the best
/// objective never decreases with depth.
///
/// Restarts run in parallel on the ambient rayon pool; the winner is the
/// highest objective, ties going to the lowest restart index, so the result
/// does not depend on scheduling.
pub fn search_extremal(
    params: &BellmanParams,
    config: &SearchConfig,
) -> Result<(ExtremalCandidate, SearchReport)> {
    params.validate()?;
    config.validate()?;
    let first = start_depth(params, config.arity, config.depth);
    let levels = (first..=config.depth)
        .map(|d| Level::new(config.arity, d))
        .collect::<Result<Vec<_>>>()?;
    let tree = Arc::clone(&levels.last().expect("nonempty ladder").tree);
    let problem = Problem {
        params,
        config,
        bellman: bellman_value(params)?,
        levels,
    };

    let runs: Vec<Result<Restart>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| problem.run(r))
        .collect();
    let mut best: Option<Restart> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.objective > b.objective) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");

    let phi = TreeFunction::new(Arc::clone(&tree), best.values.clone())?;
    let moments = realized_moments(&tree, &best.values, params.p);
    let gap = problem.bellman - best.objective;
    let candidate = ExtremalCandidate {
        phi,
        moments,
        objective: best.objective,
        gap,
    };
    let report = SearchReport {
        params: *params,
        config: config.clone(),
        best: BestCandidate {
            leaf_values: best.values,
            moments: Moments { f: moments.0, big_f: moments.1 },
            objective: best.objective,
            gap,
        },
        trace: best.trace,
    };
    Ok((candidate, report))
}

fn realized_moments(tree: &MeasureTree, values: &[f64], p: f64) -> (f64, f64) {
    tree.leaves().iter().zip(values).fold((0.0, 0.0), |(a, b), (leaf, v)| {
        (a + leaf.mass * v, b + leaf.mass * powp(*v, p))
    })
}

/// Re-checks a report read back from disk: the tree rebuilds and partitions
/// correctly, the best candidate has the target moments, its objective and gap
/// are reproducible, and nothing recorded breaks the Bellman ceiling.
pub fn validate_report(report: &SearchReport) -> Result<ExtremalCandidate> {
    report.params.validate()?;
    report.config.validate()?;
    let params = &report.params;
    let tree = Arc::new(MeasureTree::uniform(report.config.arity, report.config.depth)?);
    tree.validate()?;
    for level in 0..=tree.depth() {
        let total: f64 = tree.nodes()[tree.level_nodes(level)?].iter().map(|n| n.mass).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvariantViolation(format!(
                "level {level} masses sum to {total}"
            )));
        }
    }
    let best = &report.best;
    let phi = TreeFunction::new(Arc::clone(&tree), best.leaf_values.clone())?;
    let (f, big_f) = realized_moments(&tree, &best.leaf_values, params.p);
    let moment_tol = 1e-8;
    if (f - params.f).abs() > moment_tol || (big_f - params.big_f).abs() > moment_tol {
        return Err(Error::InvariantViolation(format!(
            "moments ({f}, {big_f}) miss the targets ({}, {})",
            params.f, params.big_f
        )));
    }
    let bellman = bellman_value(params)?;
    let objective = maximal_energy(&tree, &best.leaf_values, params.p);
    if (objective - best.objective).abs() > 1e-12 * objective.max(1.0) {
        return Err(Error::InvariantViolation(format!(
            "recorded objective {} does not reproduce ({objective})",
            best.objective
        )));
    }
    if (bellman - objective - best.gap).abs() > 1e-12 * bellman.max(1.0) {
        return Err(Error::InvariantViolation(format!(
            "recorded gap {} disagrees with {}",
            best.gap,
            bellman - objective
        )));
    }
    if let Some(t) = report.trace.iter().find(|t| t.objective > bellman + CEILING_TOL) {
        return Err(Error::InvariantViolation(format!(
            "iteration {} objective {} exceeds the Bellman value {bellman}",
            t.iter, t.objective
        )));
    }
    if objective > bellman + CEILING_TOL {
        return Err(Error::InvariantViolation(format!(
            "objective {objective} exceeds the Bellman value {bellman}"
        )));
    }
    Ok(ExtremalCandidate {
        phi,
        moments: (f, big_f),
        objective,
        gap: bellman - objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> BellmanParams {
        BellmanParams::new(2.0, 1.0, 4.0 / 3.0).unwrap()
    }

    #[test]
    fn depth_zero_boundary() {
        let params = BellmanParams::new(2.0, 1.5, 2.25).unwrap();
        let config = SearchConfig { depth: 0, restarts: 2, max_iters: 5, ..Default::default() };
        let (cand, report) = search_extremal(&params, &config).unwrap();
        assert_eq!(cand.phi.values(), &[1.5]);
        approx::assert_abs_diff_eq!(cand.objective, 2.25, epsilon = 1e-12);
        approx::assert_abs_diff_eq!(cand.gap, 0.0, epsilon = 1e-12);
        assert_eq!(report.best.leaf_values, vec![1.5]);
    }

    #[test]
    fn depth_zero_interior_target_is_infeasible() {
        let config = SearchConfig { depth: 0, ..Default::default() };
        assert!(matches!(
            search_extremal(&params(), &config),
            Err(Error::CannotNormalize(_))
        ));
    }

    #[test]
    fn search_improves_and_respects_ceiling() {
        let config = SearchConfig { depth: 4, restarts: 2, max_iters: 60, seed: 3, ..Default::default() };
        let (cand, report) = search_extremal(&params(), &config).unwrap();
        let first = report.trace.first().unwrap().objective;
        assert!(cand.objective > first);
        assert!(cand.gap >= -CEILING_TOL);
        assert!(report.trace.iter().all(|t| t.gap >= -CEILING_TOL));
        assert!((cand.moments.0 - 1.0).abs() < 1e-8);
        assert!((cand.moments.1 - 4.0 / 3.0).abs() < 1e-8);
        validate_report(&report).unwrap();
    }

    #[test]
    fn tangent_is_orthogonal_to_normals() {
        let config = SearchConfig::default();
        let params = params();
        let problem = Problem {
            params: &params,
            config: &config,
            bellman: 3.0,
            levels: vec![Level::new(2, 2).unwrap()],
        };
        let x = [0.5, 1.0, 1.5, 1.0];
        let d = problem.tangent(&problem.levels[0], &x, vec![1.0, -2.0, 0.3, 4.0]);
        let s1: f64 = d.iter().map(|v| 0.25 * v).sum();
        let s2: f64 = d.iter().zip(&x).map(|(v, a)| 0.25 * v * a).sum();
        assert!(s1.abs() < 1e-14 && s2.abs() < 1e-14);
    }

    #[test]
    fn ladder_starts_where_the_target_fits() {
        // F/f^p = 4/3 needs at least two leaves when p = 2.
        assert_eq!(start_depth(&params(), 2, 10), 1);
        let boundary = BellmanParams::new(2.0, 1.0, 1.0).unwrap();
        assert_eq!(start_depth(&boundary, 2, 10), 0);
        // 2^{d} > 5 first at d = 3.
        let steep = BellmanParams::new(2.0, 1.0, 5.0).unwrap();
        assert_eq!(start_depth(&steep, 2, 10), 3);
        assert_eq!(lift(&[1.0, 2.0], 3), vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn tampered_reports_fail_validation() {
        let config = SearchConfig { depth: 3, restarts: 1, max_iters: 10, ..Default::default() };
        let (_, report) = search_extremal(&params(), &config).unwrap();
        let mut bad = report.clone();
        bad.best.objective += 1e-6;
        assert!(matches!(validate_report(&bad), Err(Error::InvariantViolation(_))));
        let mut bad = report.clone();
        bad.best.leaf_values[0] *= 1.01;
        assert!(validate_report(&bad).is_err());
        let mut bad = report;
        bad.trace[0].objective = 10.0;
        assert!(validate_report(&bad).is_err());
    }
}
