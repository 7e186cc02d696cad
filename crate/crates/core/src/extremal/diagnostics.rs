//! Necessary conditions for near-extremal candidates, evaluated per node.

use serde::{Deserialize, Serialize};

use crate::bellman::{bellman_value, BellmanParams};
use crate::error::{Error, Result};
use crate::maximal::{chain_maxima, hoelder_slack, node_averages, powp};
use crate::tree::{MeasureTree, NodeId, TreeFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationEntry {
    pub node: NodeId,
    pub level: usize,
    pub mass: f64,
    pub avg_phi: f64,
    pub avg_phip: f64,
    pub avg_maxenergy: f64,
    pub dev_f: f64,
    #[serde(rename = "dev_F")]
    pub dev_big_f: f64,
    #[serde(rename = "dev_S")]
    pub dev_s: f64,
}

/// Local averages of `φ`, `φ^p` and `(M_T φ)^p` against `f`, `F` and `S_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub bellman: f64,
    pub entries: Vec<LocalizationEntry>,
}

impl LocalizationReport {
    fn max_of(&self, level: usize, pick: impl Fn(&LocalizationEntry) -> f64) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.level == level)
            .map(pick)
            .fold(0.0, f64::max)
    }

    /// Largest `|avg_φ − f|` over the nodes of `level`.
    pub fn max_dev_f(&self, level: usize) -> f64 {
        self.max_of(level, |e| e.dev_f)
    }

    pub fn max_dev_big_f(&self, level: usize) -> f64 {
        self.max_of(level, |e| e.dev_big_f)
    }

    pub fn max_dev_s(&self, level: usize) -> f64 {
        self.max_of(level, |e| e.dev_s)
    }
}

pub fn localization_report(
    phi: &TreeFunction,
    params: &BellmanParams,
    levels: &[usize],
) -> Result<LocalizationReport> {
    let tree = phi.tree();
    let p = params.p;
    let bellman = bellman_value(params)?;
    let values = phi.values();
    let powered: Vec<f64> = values.iter().map(|v| powp(*v, p)).collect();
    let avg = node_averages(tree, values);
    let maxima = chain_maxima(tree, &avg, tree.root());
    let energy: Vec<f64> = maxima.iter().map(|m| powp(*m, p)).collect();
    let (int_p, int_e) = (tree.node_integrals(&powered), tree.node_integrals(&energy));

    let mut entries = Vec::new();
    for &level in levels {
        for id in tree.level_nodes(level)? {
            let node = &tree.nodes()[id];
            let (avg_phip, avg_maxenergy) = (int_p[id] / node.mass, int_e[id] / node.mass);
            entries.push(LocalizationEntry {
                node: NodeId(id),
                level,
                mass: node.mass,
                avg_phi: avg[id],
                avg_phip,
                avg_maxenergy,
                dev_f: (avg[id] - params.f).abs(),
                dev_big_f: (avg_phip - params.big_f).abs(),
                dev_s: (avg_maxenergy - bellman).abs(),
            });
        }
    }
    Ok(LocalizationReport { bellman, entries })
}

/// `max |avg_I φ − f|` over the nodes `I` of one level.
pub(crate) fn level_max_deviation(tree: &MeasureTree, averages: &[f64], f: f64, level: usize) -> f64 {
    tree.level_nodes(level)
        .map(|r| averages[r].iter().map(|a| (a - f).abs()).fold(0.0, f64::max))
        .unwrap_or(0.0)
}

/// Mass of the leaves where `M_T φ ≤ f (1 + rel_tol)`.
///
/// Since `M_T φ ≥ ∫φ` everywhere, for `f = ∫φ` this is the approximate level
/// set `{M_T φ = f}`.
pub fn level_set_measure(phi: &TreeFunction, f: f64, rel_tol: f64) -> Result<f64> {
    if !(rel_tol > 0.0) {
        return Err(Error::Domain(format!("rel_tol = {rel_tol} must be positive")));
    }
    let tree = phi.tree();
    let avg = node_averages(tree, phi.values());
    let maxima = chain_maxima(tree, &avg, tree.root());
    Ok(level_set_mass(tree, &maxima, f, rel_tol))
}

pub(crate) fn level_set_mass(tree: &MeasureTree, maxima: &[f64], f: f64, rel_tol: f64) -> f64 {
    let cut = f * (1.0 + rel_tol);
    tree.leaves()
        .iter()
        .zip(maxima)
        .filter(|(_, m)| **m <= cut)
        .map(|(leaf, _)| leaf.mass)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackEntry {
    pub node: NodeId,
    pub level: usize,
    /// `None` when `φ` vanishes on the node and the slack is undefined.
    pub delta: Option<f64>,
}

/// Hölder slack `δ_{φ,J}` for every node `J` of the requested levels.
pub fn slack_audit(phi: &TreeFunction, p: f64, levels: &[usize]) -> Result<Vec<SlackEntry>> {
    let tree = phi.tree();
    let mut out = Vec::new();
    for &level in levels {
        for id in tree.level_nodes(level)? {
            let node = NodeId(id);
            let delta = match hoelder_slack(phi, node, p) {
                Ok(d) => Some(d),
                Err(Error::DegenerateInput(_)) => None,
                Err(e) => return Err(e),
            };
            out.push(SlackEntry { node, level, delta });
        }
    }
    Ok(out)
}

/// `∫_J (φ − g) dμ`.
pub fn weak_pairing(phi: &TreeFunction, g: &TreeFunction, j: NodeId) -> Result<f64> {
    phi.check_same_domain(g)?;
    let tree = phi.tree();
    let range = tree.node(j)?.leaves.clone();
    Ok(tree.leaves()[range.clone()]
        .iter()
        .zip(&phi.values()[range.clone()])
        .zip(&g.values()[range])
        .map(|((leaf, a), b)| leaf.mass * (a - b))
        .sum())
}

/// `m f₁^p + (1−m) f₂^p − (m f₁ + (1−m) f₂)^p`, the strict-convexity excess of
/// a two-piece split of mass `m` and `1 − m`.
pub fn split_convexity_gap(mass: f64, f1: f64, f2: f64, p: f64) -> f64 {
    let f = mass * f1 + (1.0 - mass) * f2;
    mass * f1.powf(p) + (1.0 - mass) * f2.powf(p) - f.powf(p)
}
