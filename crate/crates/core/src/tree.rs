//! Finite-depth tree measure spaces.
//!
//! A [`MeasureTree`] is a rooted tree of measurable sets. The root is the
//! whole probability space (mass 1), every internal node is partitioned into
//! at least two children, and every leaf sits at the same depth. Leaves are
//! the atoms of the functions we work with ([`TreeFunction`]).
//!
//! Nodes are stored in breadth-first order with children kept in the order
//! they were declared, so the leaves under any node form a contiguous range
//! of leaf indices.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for sibling masses summing to their parent.
pub const PARTITION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub mass: f64,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub level: usize,
    /// Indices (into the leaf vector) of the leaves below this node.
    pub leaves: Range<usize>,
}

impl NodeRecord {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTree {
    nodes: Vec<NodeRecord>,
    depth: usize,
    /// `level_starts[l]..level_starts[l + 1]` are the node ids at level `l`.
    level_starts: Vec<usize>,
}

/// One level of a custom tree description.
///
/// A flat group applies to every node of the level; a list of groups gives
/// one group per node, in breadth-first order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelSpec {
    Shared(Vec<f64>),
    PerNode(Vec<Vec<f64>>),
}

/// Serializable tree description: `{"uniform": {...}}` or `{"custom": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeSpec {
    Uniform { arity: usize, depth: usize },
    Custom(Vec<LevelSpec>),
}

impl TreeSpec {
    pub fn build(&self) -> Result<MeasureTree> {
        match self {
            TreeSpec::Uniform { arity, depth } => MeasureTree::uniform(*arity, *depth),
            TreeSpec::Custom(levels) => MeasureTree::custom(levels),
        }
    }
}

impl MeasureTree {
    /// Homogeneous tree: every internal node splits into `arity` children of
    /// equal mass.
    pub fn uniform(arity: usize, depth: usize) -> Result<Self> {
        if arity < 2 {
            return Err(Error::InvalidArity(arity));
        }
        let split = vec![1.0 / arity as f64; arity];
        let mut tree = Self::assemble(depth, |_, _| Ok(&split[..]))?;
        // Exact powers rather than accumulated products.
        let k = arity as f64;
        for node in &mut tree.nodes {
            node.mass = k.powi(-(node.level as i32));
        }
        Ok(tree)
    }

    /// Tree whose level `l` split is described by `levels[l]`.
    pub fn custom(levels: &[LevelSpec]) -> Result<Self> {
        for level in levels {
            let groups: Vec<&[f64]> = match level {
                LevelSpec::Shared(g) => vec![&g[..]],
                LevelSpec::PerNode(gs) => gs.iter().map(|g| &g[..]).collect(),
            };
            for group in groups {
                check_group(group)?;
            }
        }
        Self::assemble(levels.len(), |level, index| match &levels[level] {
            LevelSpec::Shared(g) => Ok(&g[..]),
            LevelSpec::PerNode(gs) => gs.get(index).map(|g| &g[..]).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "level {level} lists {} groups but has more nodes",
                    gs.len()
                ))
            }),
        })
        .and_then(|tree| {
            // Extra groups are as malformed as missing ones.
            for (level, spec) in levels.iter().enumerate() {
                if let LevelSpec::PerNode(gs) = spec {
                    let width = tree.level_nodes(level)?.len();
                    if gs.len() != width {
                        return Err(Error::InvalidConfig(format!(
                            "level {level} has {width} nodes but {} groups",
                            gs.len()
                        )));
                    }
                }
            }
            Ok(tree)
        })
    }

    fn assemble<'a, F>(depth: usize, mut split: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Result<&'a [f64]>,
    {
        let mut nodes = vec![NodeRecord {
            mass: 1.0,
            parent: None,
            children: Vec::new(),
            level: 0,
            leaves: 0..0,
        }];
        let mut level_starts = vec![0, 1];
        for level in 0..depth {
            let (start, end) = (level_starts[level], level_starts[level + 1]);
            for (index, id) in (start..end).enumerate() {
                let fractions = split(level, index)?;
                check_group(fractions)?;
                let parent_mass = nodes[id].mass;
                for &frac in fractions {
                    let child = NodeId(nodes.len());
                    nodes.push(NodeRecord {
                        mass: parent_mass * frac,
                        parent: Some(NodeId(id)),
                        children: Vec::new(),
                        level: level + 1,
                        leaves: 0..0,
                    });
                    nodes[id].children.push(child);
                }
            }
            level_starts.push(nodes.len());
        }

        let first_leaf = level_starts[depth];
        for id in (0..nodes.len()).rev() {
            nodes[id].leaves = if nodes[id].children.is_empty() {
                let i = id - first_leaf;
                i..i + 1
            } else {
                let lo = nodes[nodes[id].children[0].0].leaves.start;
                let hi = nodes[nodes[id].children.last().unwrap().0].leaves.end;
                lo..hi
            };
        }

        let tree = MeasureTree {
            nodes,
            depth,
            level_starts,
        };
        tree.validate()?;
        Ok(tree)
    }

    /// Checks the structural invariants: unit root, positive masses, at least
    /// two children per internal node, children partitioning their parent and
    /// all leaves at full depth.
    pub fn validate(&self) -> Result<()> {
        let root = &self.nodes[0];
        if (root.mass - 1.0).abs() > PARTITION_TOL {
            return Err(Error::InvalidMass(root.mass));
        }
        for node in &self.nodes {
            if !(node.mass > 0.0 && node.mass.is_finite()) {
                return Err(Error::InvalidMass(node.mass));
            }
            if node.is_leaf() {
                if node.level != self.depth {
                    return Err(Error::InvalidConfig(format!(
                        "leaf at level {} in a tree of depth {}",
                        node.level, self.depth
                    )));
                }
                continue;
            }
            if node.children.len() < 2 {
                return Err(Error::InvalidArity(node.children.len()));
            }
            let sum: f64 = node.children.iter().map(|c| self.nodes[c.0].mass).sum();
            if (sum - node.mass).abs() > PARTITION_TOL {
                return Err(Error::InvalidPartition {
                    sum: sum / node.mass,
                });
            }
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.len() - self.level_starts[self.depth]
    }

    pub fn node(&self, id: NodeId) -> Result<&NodeRecord> {
        self.nodes.get(id.0).ok_or(Error::UnknownNode(id))
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    /// Node ids at `level`, in breadth-first order.
    pub fn level_nodes(&self, level: usize) -> Result<Range<usize>> {
        if level > self.depth {
            return Err(Error::InvalidLevel {
                level,
                depth: self.depth,
            });
        }
        Ok(self.level_starts[level]..self.level_starts[level + 1])
    }

    /// Node id of the leaf with leaf index `i`.
    pub fn leaf_node(&self, i: usize) -> NodeId {
        NodeId(self.level_starts[self.depth] + i)
    }

    /// Leaf records, in leaf-index order.
    pub fn leaves(&self) -> &[NodeRecord] {
        &self.nodes[self.level_starts[self.depth]..]
    }

    /// Largest node mass at `level`.
    pub fn max_level_mass(&self, level: usize) -> Result<f64> {
        let range = self.level_nodes(level)?;
        Ok(self.nodes[range]
            .iter()
            .map(|n| n.mass)
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// `j` and all of its descendants, in level order.
    pub fn subtree_nodes(&self, j: NodeId) -> Result<Vec<NodeId>> {
        self.node(j)?;
        let mut out = vec![j];
        let mut head = 0;
        while head < out.len() {
            let id = out[head];
            out.extend_from_slice(&self.nodes[id.0].children);
            head += 1;
        }
        Ok(out)
    }

    /// Integral of leafwise `values` over every node, indexed by node id.
    pub fn node_integrals(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.leaf_count());
        let first_leaf = self.level_starts[self.depth];
        let mut sums = vec![0.0; self.nodes.len()];
        for (i, v) in values.iter().enumerate() {
            sums[first_leaf + i] = self.nodes[first_leaf + i].mass * v;
        }
        for id in (0..first_leaf).rev() {
            sums[id] = self.nodes[id].children.iter().map(|c| sums[c.0]).sum();
        }
        sums
    }
}

fn check_group(group: &[f64]) -> Result<()> {
    if group.len() < 2 {
        return Err(Error::InvalidArity(group.len()));
    }
    if let Some(&bad) = group.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidMass(bad));
    }
    let sum: f64 = group.iter().sum();
    if (sum - 1.0).abs() > PARTITION_TOL {
        return Err(Error::InvalidPartition { sum });
    }
    Ok(())
}

/// A nonnegative function constant on the leaves of a tree (a T-simple
/// function at the tree's depth).
#[derive(Debug, Clone, PartialEq)]
pub struct TreeFunction {
    tree: Arc<MeasureTree>,
    values: Vec<f64>,
}

impl TreeFunction {
    pub fn new(tree: Arc<MeasureTree>, values: Vec<f64>) -> Result<Self> {
        if values.len() != tree.leaf_count() {
            return Err(Error::DomainMismatch(format!(
                "{} values for {} leaves",
                values.len(),
                tree.leaf_count()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidFunction(format!("leaf {i} has value {v}")));
        }
        Ok(TreeFunction { tree, values })
    }

    pub fn constant(tree: Arc<MeasureTree>, c: f64) -> Result<Self> {
        let n = tree.leaf_count();
        Self::new(tree, vec![c; n])
    }

    pub fn tree(&self) -> &MeasureTree {
        &self.tree
    }

    pub fn shared_tree(&self) -> &Arc<MeasureTree> {
        &self.tree
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same tree, new leaf values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(Arc::clone(&self.tree), values)
    }

    /// Errors unless `other` lives on the same tree.
    pub fn check_same_domain(&self, other: &TreeFunction) -> Result<()> {
        if Arc::ptr_eq(&self.tree, &other.tree) || self.tree == other.tree {
            Ok(())
        } else {
            Err(Error::DomainMismatch(
                "functions live on different trees".into(),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn masses(tree: &MeasureTree) -> Vec<f64> {
        tree.leaves().iter().map(|n| n.mass).collect()
    }

    #[test]
    fn uniform_depth_zero_is_a_single_atom() {
        let t = MeasureTree::uniform(2, 0).unwrap();
        assert_eq!(t.node_count(), 1);
        assert_eq!(t.leaf_count(), 1);
        assert_eq!(t.node(t.root()).unwrap().mass, 1.0);
        assert!(t.node(t.root()).unwrap().is_leaf());
    }

    #[test]
    fn uniform_binary_depth_one() {
        let t = MeasureTree::uniform(2, 1).unwrap();
        assert_eq!(t.node_count(), 3);
        assert_eq!(masses(&t), vec![0.5, 0.5]);
    }

    #[test]
    fn uniform_ternary_depth_two() {
        let t = MeasureTree::uniform(3, 2).unwrap();
        assert_eq!(t.leaf_count(), 9);
        for m in masses(&t) {
            assert_abs_diff_eq!(m, 1.0 / 9.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn arity_below_two_is_rejected() {
        assert_eq!(MeasureTree::uniform(1, 3), Err(Error::InvalidArity(1)));
        assert_eq!(MeasureTree::uniform(0, 0), Err(Error::InvalidArity(0)));
    }

    #[test]
    fn custom_matches_uniform() {
        let c = MeasureTree::custom(&[LevelSpec::Shared(vec![0.5, 0.5])]).unwrap();
        assert_eq!(c, MeasureTree::uniform(2, 1).unwrap());
    }

    #[test]
    fn custom_uneven_split() {
        let c = MeasureTree::custom(&[LevelSpec::Shared(vec![0.3, 0.7])]).unwrap();
        assert_eq!(masses(&c), vec![0.3, 0.7]);
    }

    fn two_level_custom() -> MeasureTree {
        MeasureTree::custom(&[
            LevelSpec::Shared(vec![0.5, 0.5]),
            LevelSpec::PerNode(vec![vec![0.25, 0.75], vec![0.5, 0.5]]),
        ])
        .unwrap()
    }

    #[test]
    fn custom_masses_are_path_products() {
        let c = two_level_custom();
        let got = masses(&c);
        for (g, e) in got.iter().zip([0.125, 0.375, 0.25, 0.25]) {
            assert_abs_diff_eq!(*g, e, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(c.max_level_mass(2).unwrap(), 0.375, epsilon = 1e-15);
    }

    #[test]
    fn custom_errors() {
        assert_eq!(
            MeasureTree::custom(&[LevelSpec::Shared(vec![1.0])]),
            Err(Error::InvalidArity(1))
        );
        assert!(matches!(
            MeasureTree::custom(&[LevelSpec::Shared(vec![0.5, 0.6])]),
            Err(Error::InvalidPartition { .. })
        ));
        assert_eq!(
            MeasureTree::custom(&[LevelSpec::Shared(vec![-0.5, 1.5])]),
            Err(Error::InvalidMass(-0.5))
        );
        assert_eq!(
            MeasureTree::custom(&[LevelSpec::Shared(vec![0.0, 1.0])]),
            Err(Error::InvalidMass(0.0))
        );
        // One group for two nodes.
        assert!(matches!(
            MeasureTree::custom(&[
                LevelSpec::Shared(vec![0.5, 0.5]),
                LevelSpec::PerNode(vec![vec![0.5, 0.5]]),
            ]),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn max_level_mass_examples() {
        let t = MeasureTree::uniform(2, 3).unwrap();
        assert_eq!(t.max_level_mass(3).unwrap(), 0.125);
        assert_eq!(t.max_level_mass(0).unwrap(), 1.0);
        assert_eq!(two_level_custom().max_level_mass(0).unwrap(), 1.0);
        assert_eq!(
            t.max_level_mass(4),
            Err(Error::InvalidLevel { level: 4, depth: 3 })
        );
    }

    #[test]
    fn subtree_examples() {
        let t = MeasureTree::uniform(2, 1).unwrap();
        assert_eq!(t.subtree_nodes(t.root()).unwrap().len(), 3);
        assert_eq!(t.subtree_nodes(NodeId(2)).unwrap(), vec![NodeId(2)]);

        let t = MeasureTree::uniform(2, 2).unwrap();
        assert_eq!(
            t.subtree_nodes(NodeId(1)).unwrap(),
            vec![NodeId(1), NodeId(3), NodeId(4)]
        );
        assert_eq!(t.subtree_nodes(NodeId(7)), Err(Error::UnknownNode(NodeId(7))));
    }

    #[test]
    fn leaf_ranges_are_contiguous() {
        let t = MeasureTree::uniform(3, 3).unwrap();
        assert_eq!(t.node(t.root()).unwrap().leaves, 0..27);
        assert_eq!(t.node(NodeId(2)).unwrap().leaves, 9..18);
    }

    #[test]
    fn tree_spec_json() {
        let u: TreeSpec = serde_json::from_str(r#"{"uniform": {"arity": 2, "depth": 3}}"#).unwrap();
        assert_eq!(u, TreeSpec::Uniform { arity: 2, depth: 3 });
        let c: TreeSpec =
            serde_json::from_str(r#"{"custom": [[0.5,0.5],[[0.25,0.75],[0.5,0.5]]]}"#).unwrap();
        assert_eq!(c.build().unwrap(), two_level_custom());
    }

    #[test]
    fn tree_function_rejects_bad_values() {
        let t = Arc::new(MeasureTree::uniform(2, 1).unwrap());
        assert!(matches!(
            TreeFunction::new(t.clone(), vec![1.0, -1.0]),
            Err(Error::InvalidFunction(_))
        ));
        assert!(matches!(
            TreeFunction::new(t, vec![1.0]),
            Err(Error::DomainMismatch(_))
        ));
    }
}
