//! Recursive splitting: population-based hierarchical NMF (hard splits,
//! similarity stopping rule) and top-down HNMF (soft splits, minimum topic
//! size).

mod assign;
mod build;
mod export;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use assign::{
    assign_hard, assign_hard_with, assign_soft, assign_soft_with, Alpha, HardAssignment,
};
pub use build::{hnmf_topdown, phnmf};
pub use export::{sorted_row_order, to_dot, write_pgm, ChildFeatures, FeatureWeight, TreeExport};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model_select::{DEFAULT_K_MAX, DEFAULT_K_MIN, DEFAULT_N_SEEDS};
use crate::nmf::NmfConfig;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RankPolicy {
    Fixed { k: usize },
    Auto { k_min: usize, k_max: usize },
}

impl Default for RankPolicy {
    fn default() -> Self {
        RankPolicy::Auto {
            k_min: DEFAULT_K_MIN,
            k_max: DEFAULT_K_MAX,
        }
    }
}

impl RankPolicy {
    /// Smallest rank this policy may use.
    pub fn min_rank(&self) -> usize {
        match *self {
            RankPolicy::Fixed { k } => k,
            RankPolicy::Auto { k_min, .. } => k_min,
        }
    }
}

/// What ends the recursion: the similarity threshold β (PHNMF) or the minimum
/// topic size t (top-down HNMF).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Similarity { beta: f64 },
    MinDocs { min_docs: usize },
}

pub const DEFAULT_BETA: f64 = 0.8;
pub const DEFAULT_MAX_DEPTH: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HnmfConfig {
    pub alpha: Alpha,
    pub termination: Termination,
    pub max_depth: usize,
    pub rank_policy: RankPolicy,
    /// Runs per similarity evaluation.
    pub n_seeds: usize,
    pub nmf: NmfConfig,
}

impl HnmfConfig {
    pub fn phnmf(beta: f64) -> Self {
        HnmfConfig {
            alpha: Alpha::default(),
            termination: Termination::Similarity { beta },
            max_depth: DEFAULT_MAX_DEPTH,
            rank_policy: RankPolicy::default(),
            n_seeds: DEFAULT_N_SEEDS,
            nmf: NmfConfig::default(),
        }
    }

    pub fn topdown(min_docs: usize) -> Self {
        HnmfConfig {
            termination: Termination::MinDocs { min_docs },
            ..Self::phnmf(DEFAULT_BETA)
        }
    }

    pub fn with_rank_policy(mut self, policy: RankPolicy) -> Self {
        self.rank_policy = policy;
        self
    }

    pub fn with_alpha(mut self, alpha: Alpha) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_max_depth(mut self, depth: usize) -> Self {
        self.max_depth = depth;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.nmf.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        match self.alpha {
            Alpha::Absolute(a) | Alpha::Relative(a) if !(a >= 0.0) || !a.is_finite() => {
                return Err(Error::Parameter(format!("alpha must be ≥ 0, got {a}")))
            }
            _ => {}
        }
        if let Termination::Similarity { beta } = self.termination {
            if !(0.0..=1.0).contains(&beta) {
                return Err(Error::Parameter(format!("beta must lie in [0, 1], got {beta}")));
            }
        }
        if let Termination::MinDocs { min_docs: 0 } = self.termination {
            return Err(Error::Parameter("min_docs must be positive".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::Parameter("max_depth must be positive".into()));
        }
        match self.rank_policy {
            RankPolicy::Fixed { k } if k < 1 => {
                return Err(Error::Parameter("fixed rank must be ≥ 1".into()))
            }
            RankPolicy::Auto { k_min, k_max } if k_min < 2 || k_min > k_max => {
                return Err(Error::Parameter(format!(
                    "auto rank range {k_min}..={k_max} is invalid"
                )))
            }
            _ => {}
        }
        if self.n_seeds < 2 && matches!(self.termination, Termination::Similarity { .. }) {
            return Err(Error::Parameter("n_seeds must be ≥ 2".into()));
        }
        Ok(())
    }
}

/// Why a node was not split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafReason {
    /// Feature similarity did not exceed β.
    SimilarityAtOrBelowBeta,
    /// Too few members (or columns) for the smallest usable rank.
    TooFewMembers,
    MaxDepth,
    /// Fewer than two non-empty children, or a child equal to the parent.
    DegenerateSplit,
    /// Top-down HNMF: fewer members than the minimum topic size.
    BelowMinDocs,
}

#[derive(Debug, Clone)]
pub struct TreeNode<T> {
    pub node_id: String,
    pub depth: usize,
    /// Row indices into the original matrix.
    pub members: Vec<usize>,
    /// Members below the assignment threshold; kept here, never recursed on.
    pub residual_members: Vec<usize>,
    /// Rank of the local factorization, 0 when none was computed.
    pub rank_used: usize,
    pub w_local: Option<Matrix<T>>,
    pub h_local: Option<Matrix<T>>,
    pub similarity_score: Option<T>,
    /// Per-rank scores when the rank was selected automatically.
    pub rank_scores: Option<BTreeMap<usize, T>>,
    /// Row of the parent's `H` this node was split off along.
    pub parent_topic: Option<usize>,
    pub leaf_reason: Option<LeafReason>,
    pub children: Vec<TreeNode<T>>,
}

impl<T: Scalar> TreeNode<T> {
    fn new(node_id: String, depth: usize, members: Vec<usize>, parent_topic: Option<usize>) -> Self {
        TreeNode {
            node_id,
            depth,
            members,
            residual_members: Vec::new(),
            rank_used: 0,
            w_local: None,
            h_local: None,
            similarity_score: None,
            rank_scores: None,
            parent_topic,
            leaf_reason: None,
            children: Vec::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Depth-first pre-order walk.
    pub fn walk(&self) -> Vec<&TreeNode<T>> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.walk());
        }
        out
    }

    /// Top `n` columns of row `topic` of the local `H`, by weight.
    pub fn top_features(&self, topic: usize, n: usize) -> Vec<(usize, T)> {
        let Some(h) = &self.h_local else {
            return Vec::new();
        };
        let mut v: Vec<(usize, T)> = h.row(topic).iter().copied().enumerate().collect();
        v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
        v.truncate(n);
        v
    }
}

fn leaves_of<T: Scalar>(root: &TreeNode<T>) -> Vec<(String, Vec<usize>)> {
    root.walk()
        .into_iter()
        .filter(|n| n.is_leaf())
        .map(|n| (n.node_id.clone(), n.members.clone()))
        .collect()
}

fn residuals_of<T: Scalar>(root: &TreeNode<T>) -> Vec<(String, Vec<usize>)> {
    root.walk()
        .into_iter()
        .filter(|n| !n.residual_members.is_empty())
        .map(|n| (n.node_id.clone(), n.residual_members.clone()))
        .collect()
}

/// Tree of disjoint subpopulations.
#[derive(Debug, Clone)]
pub struct PopulationTree<T> {
    pub root: TreeNode<T>,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl<T: Scalar> PopulationTree<T> {
    /// Leaves in depth-first order with their member sets.
    pub fn leaves(&self) -> Vec<(String, Vec<usize>)> {
        leaves_of(&self.root)
    }

    /// Residual sets by node, depth-first.
    pub fn residuals(&self) -> Vec<(String, Vec<usize>)> {
        residuals_of(&self.root)
    }

    pub fn all_residuals(&self) -> Vec<usize> {
        self.residuals().into_iter().flat_map(|(_, r)| r).collect()
    }

    pub fn nodes(&self) -> Vec<&TreeNode<T>> {
        self.root.walk()
    }
}

/// Tree of possibly overlapping topics.
#[derive(Debug, Clone)]
pub struct TopicTree<T> {
    pub root: TreeNode<T>,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl<T: Scalar> TopicTree<T> {
    pub fn leaves(&self) -> Vec<(String, Vec<usize>)> {
        leaves_of(&self.root)
    }

    pub fn nodes(&self) -> Vec<&TreeNode<T>> {
        self.root.walk()
    }
}

/// Free function form of [`PopulationTree::leaves`].
pub fn leaves<T: Scalar>(tree: &PopulationTree<T>) -> Vec<(String, Vec<usize>)> {
    tree.leaves()
}

/// Path label of the `ordinal`-th child (0-based) of `parent` at `depth`.
///
/// Odd depths use digits, even depths letters; from depth 3 on, digit
/// segments are dot-separated: `1`, `1a`, `1a.1`, `1a.1a`, ...
pub fn child_id(parent: &str, depth: usize, ordinal: usize) -> String {
    let symbol = if depth % 2 == 1 {
        (ordinal + 1).to_string()
    } else if ordinal < 26 {
        ((b'a' + ordinal as u8) as char).to_string()
    } else {
        format!("z{ordinal}")
    };
    if depth == 1 {
        symbol
    } else if depth % 2 == 1 {
        format!("{parent}.{symbol}")
    } else {
        format!("{parent}{symbol}")
    }
}
