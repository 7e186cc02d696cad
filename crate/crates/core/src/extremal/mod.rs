//! Near-extremal sequences for the Bellman problem and the checks that an
//! extremal sequence has to pass.
//!
//! A sequence is modelled by the iteration history of one search: each
//! accepted iterate is a function with the prescribed moments whose maximal
//! energy creeps up toward `S_p(f, F)`.

mod diagnostics;
mod normalize;
mod search;

pub use diagnostics::{
    level_set_measure, localization_report, slack_audit, split_convexity_gap, weak_pairing,
    LocalizationEntry, LocalizationReport, SlackEntry,
};
pub use normalize::normalize_moments;
pub use search::{search_extremal, validate_report, BestCandidate, Moments, SearchReport, TraceEntry};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maximal::maximal_energy;
use crate::tree::TreeFunction;

/// Slack allowed above the Bellman value before we call it a breach.
pub const CEILING_TOL: f64 = 1e-9;
/// Default relative tolerance for the approximate level set `{M_T φ = f}`.
pub const LEVEL_SET_REL_TOL: f64 = 1e-9;
/// Candidates with `gap ≤ NEAR_EXTREMAL_FRACTION · S_p` count as near-extremal.
pub const NEAR_EXTREMAL_FRACTION: f64 = 0.05;

/// `∫_X (M_T φ)^p dμ`.
pub fn objective(phi: &TreeFunction, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    Ok(maximal_energy(phi.tree(), phi.values(), p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalCandidate {
    pub phi: TreeFunction,
    /// Realized `(∫φ, ∫φ^p)`.
    pub moments: (f64, f64),
    pub objective: f64,
    /// `S_p(f, F) − objective`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub depth: usize,
    pub arity: usize,
    pub restarts: usize,
    pub max_iters: usize,
    /// Initial step, as a fraction of `f` along the normalized direction.
    pub step_init: f64,
    pub seed: u64,
    pub tol_moments: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            depth: 6,
            arity: 2,
            restarts: 4,
            max_iters: 200,
            step_init: 0.1,
            seed: 0,
            tol_moments: 1e-10,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.tol_moments > 0.0) {
            return Err(Error::InvalidConfig("tol_moments must be positive".into()));
        }
        if !(self.step_init > 0.0 && self.step_init.is_finite()) {
            return Err(Error::InvalidConfig("step_init must be positive".into()));
        }
        if self.arity < 2 {
            return Err(Error::InvalidArity(self.arity));
        }
        Ok(())
    }
}
