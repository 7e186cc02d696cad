//! Bellman function of the tree maximal operator.
//!
//! * [`tree`]: finite-depth tree measure spaces and leafwise functions.
//! * [`maximal`]: the maximal operator, integrals, the weak-type functional
//!   and the localized Hölder slack.
//! * [`bellman`]: `H_p`, its inverse `ω_p`, `S_p(f, F)` and the concave curve
//!   `G(t) = t ω_p(1/t)^p`.
//! * [`extremal`]: projected-ascent search for near-extremal functions and the
//!   localization, level-set and pairing diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bellman;
pub mod error;
pub mod extremal;
pub mod maximal;
pub mod rng;
pub mod tree;

pub use bellman::{bellman_value, BellmanParams, OmegaSolve};
pub use error::{Error, Result};
pub use extremal::{ExtremalCandidate, SearchConfig, SearchReport};
pub use maximal::MaximalValues;
pub use tree::{MeasureTree, NodeId, TreeFunction, TreeSpec};
