//! The tree maximal operator and the integrals built on it.
//!
//! For a leaf `x`, the maximal function is the largest average of the
//! function over the nodes containing `x`. Only the ancestor chain of `x`
//! competes, so one top-down pass carrying a running maximum evaluates the
//! operator on every leaf in `O(nodes)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tree::{MeasureTree, NodeId, TreeFunction};

/// Values of a maximal function on the leaves below `anchor`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximalValues {
    tree: Arc<MeasureTree>,
    anchor: NodeId,
    values: Vec<f64>,
}

impl MaximalValues {
    pub fn anchor(&self) -> NodeId {
        self.anchor
    }

    /// One value per leaf below the anchor, in leaf order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `∫_anchor (M φ)^p dμ`.
    pub fn integrate_power(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        let range = self.tree.node(self.anchor)?.leaves.clone();
        let leaves = &self.tree.leaves()[range];
        Ok(leaves
            .iter()
            .zip(&self.values)
            .map(|(leaf, v)| leaf.mass * v.powf(p))
            .sum())
    }
}

/// `x^p`, with the common integer exponents taken off the `powf` path.
#[inline]
pub(crate) fn powp(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else if p == 3.0 {
        x * x * x
    } else {
        x.powf(p)
    }
}

/// Node averages of leafwise `values`, with leaves reporting their own value.
pub(crate) fn node_averages(tree: &MeasureTree, values: &[f64]) -> Vec<f64> {
    let mut avg = tree.node_integrals(values);
    let first_leaf = tree.leaf_node(0).0;
    for (id, (a, node)) in avg.iter_mut().zip(tree.nodes()).enumerate() {
        *a = if id >= first_leaf {
            values[id - first_leaf]
        } else {
            *a / node.mass
        };
    }
    avg
}

/// Running maxima of node averages from `anchor` down to its leaves.
pub(crate) fn chain_maxima(tree: &MeasureTree, averages: &[f64], anchor: NodeId) -> Vec<f64> {
    let nodes = tree.nodes();
    let mut running = vec![f64::NEG_INFINITY; nodes.len()];
    running[anchor.0] = averages[anchor.0];
    let first_leaf = tree.leaf_node(0).0;
    let leaves = nodes[anchor.0].leaves.clone();
    let mut out = Vec::with_capacity(leaves.len());
    if anchor.0 >= first_leaf {
        out.push(running[anchor.0]);
        return out;
    }
    // Breadth-first ids put every parent before its children.
    for id in anchor.0 + 1..nodes.len() {
        let Some(parent) = nodes[id].parent else { continue };
        let up = running[parent.0];
        if up == f64::NEG_INFINITY {
            continue;
        }
        running[id] = up.max(averages[id]);
    }
    out.extend(leaves.map(|i| running[first_leaf + i]));
    out
}

/// `∫_X (M_T φ)^p dμ` straight from leaf values, for hot loops.
pub(crate) fn maximal_energy(tree: &MeasureTree, values: &[f64], p: f64) -> f64 {
    let avg = node_averages(tree, values);
    let maxima = chain_maxima(tree, &avg, tree.root());
    tree.leaves()
        .iter()
        .zip(&maxima)
        .map(|(leaf, m)| leaf.mass * powp(*m, p))
        .sum()
}

/// Mass-weighted mean of `φ` over node `j`.
pub fn node_average(phi: &TreeFunction, j: NodeId) -> Result<f64> {
    let tree = phi.tree();
    let node = tree.node(j)?;
    if node.is_leaf() {
        return Ok(phi.values()[node.leaves.start]);
    }
    let leaves = &tree.leaves()[node.leaves.clone()];
    let integral: f64 = leaves
        .iter()
        .zip(&phi.values()[node.leaves.clone()])
        .map(|(leaf, v)| leaf.mass * v)
        .sum();
    Ok(integral / node.mass)
}

/// Like [`node_average`], but the tree is passed separately and must be the
/// one `φ` lives on.
pub fn node_average_on(tree: &MeasureTree, phi: &TreeFunction, j: NodeId) -> Result<f64> {
    if tree != phi.tree() {
        return Err(Error::DomainMismatch(
            "function does not live on this tree".into(),
        ));
    }
    node_average(phi, j)
}

/// `M_T φ` on every leaf.
pub fn maximal_function(phi: &TreeFunction) -> MaximalValues {
    let tree = phi.tree();
    localized_unchecked(phi, tree.root())
}

/// `M_J φ`: competitors restricted to the subtree rooted at `j`.
pub fn localized_maximal(phi: &TreeFunction, j: NodeId) -> Result<MaximalValues> {
    phi.tree().node(j)?;
    Ok(localized_unchecked(phi, j))
}

fn localized_unchecked(phi: &TreeFunction, j: NodeId) -> MaximalValues {
    let tree = phi.tree();
    let avg = node_averages(tree, phi.values());
    MaximalValues {
        tree: Arc::clone(phi.shared_tree()),
        anchor: j,
        values: chain_maxima(tree, &avg, j),
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

/// `Σ_{leaf ⊆ j} μ(leaf) ψ(leaf)^p` for leafwise `psi` over the whole tree.
pub fn integrate_power(tree: &MeasureTree, psi: &[f64], p: f64, j: NodeId) -> Result<f64> {
    check_exponent(p)?;
    if psi.len() != tree.leaf_count() {
        return Err(Error::DomainMismatch(format!(
            "{} values for {} leaves",
            psi.len(),
            tree.leaf_count()
        )));
    }
    if let Some(v) = psi.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidFunction(format!("negative value {v}")));
    }
    let range = tree.node(j)?.leaves.clone();
    Ok(tree.leaves()[range.clone()]
        .iter()
        .zip(&psi[range])
        .map(|(leaf, v)| leaf.mass * v.powf(p))
        .sum())
}

/// Both sides of the weak-type inequality at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakType {
    /// `μ({M_T φ ≥ λ})`
    pub lhs: f64,
    /// `(1/λ) ∫_{M_T φ ≥ λ} φ dμ`
    pub rhs: f64,
}

impl WeakType {
    pub const TOL: f64 = 1e-12;

    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + Self::TOL
    }

    /// `lhs / rhs`, or `None` on an empty level set.
    pub fn ratio(&self) -> Option<f64> {
        (self.rhs > 0.0).then(|| self.lhs / self.rhs)
    }
}

pub fn weak_type_check(phi: &TreeFunction, lambda: f64) -> Result<WeakType> {
    let maxima = maximal_function(phi);
    weak_type_with(phi, &maxima, lambda)
}

/// [`weak_type_check`] against precomputed maximal values.
pub fn weak_type_with(phi: &TreeFunction, maxima: &MaximalValues, lambda: f64) -> Result<WeakType> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidThreshold(lambda));
    }
    let (mut mass, mut integral) = (0.0, 0.0);
    for ((leaf, m), v) in phi.tree().leaves().iter().zip(maxima.values()).zip(phi.values()) {
        if *m >= lambda {
            mass += leaf.mass;
            integral += leaf.mass * v;
        }
    }
    Ok(WeakType {
        lhs: mass,
        rhs: integral / lambda,
    })
}

/// The residual `δ_{φ,J}` of the localized Bellman inequality:
///
/// `δ = −(p−1) A + p B^{1/p} A^{1−1/p} − C^p / μ(J)^{p−1}`
///
/// with `A = ∫_J (M_J φ)^p`, `B = ∫_J φ^p` and `C = ∫_J φ`. It is
/// nonnegative for every `φ` and vanishes when `φ` is constant on `J`.
pub fn hoelder_slack(phi: &TreeFunction, j: NodeId, p: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    let tree = phi.tree();
    let node = tree.node(j)?;
    let local = localized_maximal(phi, j)?;
    let a = local.integrate_power(p)?;
    let b = integrate_power(tree, phi.values(), p, j)?;
    let c = integrate_power(tree, phi.values(), 1.0, j)?;
    if c <= 0.0 {
        return Err(Error::DegenerateInput(format!(
            "function vanishes on node {j}"
        )));
    }
    Ok(-(p - 1.0) * a + p * b.powf(1.0 / p) * a.powf(1.0 - 1.0 / p)
        - c.powf(p) / node.mass.powf(p - 1.0))
}
