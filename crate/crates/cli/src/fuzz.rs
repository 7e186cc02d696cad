//! Random test functions and the weak-type fuzz run.
//!
//! Case `i` draws from its own named stream, so any single case can be
//! regenerated from the seed alone and cases can run in any order.

use std::sync::Arc;

use blab_core::maximal::{maximal_function, weak_type_with};
use blab_core::rng;
use blab_core::{MeasureTree, TreeFunction, TreeSpec};
use rand::Rng;
use rand_distr::{Distribution, Pareto};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// One value everywhere: the equality case of the weak-type bound.
    Constant,
    /// A single nonzero leaf, which makes the bound nearly tight.
    Spike,
    /// Independent Pareto leaves with random zeros.
    Pareto,
}

impl Family {
    /// Every tenth case is a constant and every tenth a spike.
    pub fn of(index: usize) -> Family {
        match index % 10 {
            0 => Family::Constant,
            1 => Family::Spike,
            _ => Family::Pareto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Generator {
    /// Pareto shape; smaller means heavier tails.
    pub tail_index: f64,
    /// Probability that a Pareto leaf is zero.
    pub sparsity: f64,
}

impl Default for Generator {
    fn default() -> Self {
        Generator { tail_index: 1.5, sparsity: 0.3 }
    }
}

impl Generator {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.tail_index > 0.0 && self.tail_index.is_finite()) {
            return Err(CliError::usage(format!("tail_index = {} must be positive", self.tail_index)));
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(CliError::usage(format!("sparsity = {} must lie in [0, 1)", self.sparsity)));
        }
        Ok(())
    }

    /// Case `index` of the stream seeded by `seed`. Never identically zero.
    pub fn sample(&self, tree: &Arc<MeasureTree>, seed: u64, index: usize) -> (Family, TreeFunction) {
        let mut rng = rng::stream(seed, "fuzz", index as u64);
        let pareto = Pareto::new(1.0, self.tail_index).expect("validated tail index");
        let n = tree.leaf_count();
        let family = Family::of(index);
        let values = match family {
            Family::Constant => vec![pareto.sample(&mut rng); n],
            Family::Spike => {
                let mut v = vec![0.0; n];
                v[rng.random_range(0..n)] = 10f64.powf(rng.random_range(-3.0..6.0));
                v
            }
            Family::Pareto => {
                let mut v: Vec<f64> = (0..n)
                    .map(|_| {
                        if rng.random::<f64>() < self.sparsity {
                            0.0
                        } else {
                            pareto.sample(&mut rng)
                        }
                    })
                    .collect();
                if v.iter().all(|x| *x == 0.0) {
                    v[rng.random_range(0..n)] = 1.0;
                }
                v
            }
        };
        let phi = TreeFunction::new(Arc::clone(tree), values).expect("finite nonnegative leaves");
        (family, phi)
    }
}

/// `n` thresholds spread evenly from `lo` to `hi`, both included.
pub fn lambda_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakTypeFuzz {
    pub count: usize,
    pub lambdas: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` over all cases and thresholds.
    pub worst_ratio: f64,
    pub worst_case: usize,
    pub worst_lambda: f64,
    pub worst_family: Family,
    /// Largest ratio among spike cases alone.
    pub spike_ratio: Option<f64>,
}

struct CaseResult {
    family: Family,
    violations: usize,
    ratio: f64,
    lambda: f64,
}

/// Checks `μ({M φ ≥ λ}) ≤ (1/λ) ∫_{M φ ≥ λ} φ` on `count` random functions,
/// each against `lambdas` thresholds from `min M φ` to `max M φ`.
pub fn fuzz_weak_type(
    tree_spec: &TreeSpec,
    count: usize,
    seed: u64,
    lambdas: usize,
    generator: &Generator,
) -> CliResult<WeakTypeFuzz> {
    if count == 0 {
        return Err(CliError::usage("count must be at least 1"));
    }
    if lambdas == 0 {
        return Err(CliError::usage("the threshold grid needs at least one point"));
    }
    generator.validate()?;
    let tree = Arc::new(tree_spec.build()?);

    let cases: Vec<CaseResult> = (0..count)
        .into_par_iter()
        .map(|i| {
            let (family, phi) = generator.sample(&tree, seed, i);
            let maxima = maximal_function(&phi);
            let (lo, hi) = maxima
                .values()
                .iter()
                .fold((f64::INFINITY, 0.0_f64), |(a, b), m| (a.min(*m), b.max(*m)));
            let mut case = CaseResult { family, violations: 0, ratio: 0.0, lambda: lo };
            for lambda in lambda_grid(lo, hi, lambdas) {
                let check = weak_type_with(&phi, &maxima, lambda)?;
                if !check.holds() {
                    case.violations += 1;
                }
                if let Some(r) = check.ratio() {
                    if r > case.ratio {
                        case.ratio = r;
                        case.lambda = lambda;
                    }
                }
            }
            Ok(case)
        })
        .collect::<Result<_, blab_core::Error>>()?;

    let (worst_case, worst) = cases
        .iter()
        .enumerate()
        .fold((0, &cases[0]), |best, (i, c)| if c.ratio > best.1.ratio { (i, c) } else { best });
    let spike_ratio = cases
        .iter()
        .filter(|c| c.family == Family::Spike)
        .map(|c| c.ratio)
        .reduce(f64::max);
    Ok(WeakTypeFuzz {
        count,
        lambdas,
        violations: cases.iter().map(|c| c.violations).sum(),
        worst_ratio: worst.ratio,
        worst_case,
        worst_lambda: worst.lambda,
        worst_family: worst.family,
        spike_ratio,
    })
}
