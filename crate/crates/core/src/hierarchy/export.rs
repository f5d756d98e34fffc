//! JSON, DOT and heatmap exports for trees.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::linalg::Matrix;
use crate::scalar::Scalar;

use super::{LeafReason, TreeNode};

const TOP_FEATURES: usize = 10;

#[derive(Debug, Clone, Serialize)]
pub struct FeatureWeight<T> {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub weight: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChildFeatures<T> {
    pub child_id: String,
    pub topic: usize,
    pub top_features: Vec<FeatureWeight<T>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeExport<T> {
    pub node_id: String,
    pub depth: usize,
    pub rank: usize,
    pub similarity_score: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_scores: Option<BTreeMap<usize, T>>,
    pub leaf_reason: Option<LeafReason>,
    pub n_members: usize,
    pub members: Vec<usize>,
    pub residuals: Vec<usize>,
    pub child_features: Vec<ChildFeatures<T>>,
    pub children: Vec<TreeExport<T>>,
}

impl<T: Scalar> TreeExport<T> {
    pub fn from_node(node: &TreeNode<T>, feature_names: Option<&[String]>) -> Self {
        let child_features = node
            .children
            .iter()
            .filter_map(|c| {
                let topic = c.parent_topic?;
                Some(ChildFeatures {
                    child_id: c.node_id.clone(),
                    topic,
                    top_features: node
                        .top_features(topic, TOP_FEATURES)
                        .into_iter()
                        .map(|(index, weight)| FeatureWeight {
                            index,
                            name: feature_names.and_then(|n| n.get(index).cloned()),
                            weight,
                        })
                        .collect(),
                })
            })
            .collect();
        TreeExport {
            node_id: node.node_id.clone(),
            depth: node.depth,
            rank: node.rank_used,
            similarity_score: node.similarity_score,
            rank_scores: node.rank_scores.clone(),
            leaf_reason: node.leaf_reason,
            n_members: node.members.len(),
            members: node.members.clone(),
            residuals: node.residual_members.clone(),
            child_features,
            children: node
                .children
                .iter()
                .map(|c| TreeExport::from_node(c, feature_names))
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }
}

/// Graphviz rendering; one box per node with size and similarity.
pub fn to_dot<T: Scalar>(root: &TreeNode<T>) -> String {
    let mut out = String::from("digraph phnmf {\n  node [shape=box, fontname=\"Helvetica\"];\n");
    for n in root.walk() {
        let sim = n
            .similarity_score
            .map_or_else(|| "-".to_string(), |s| format!("{:.4}", s.widen()));
        let _ = writeln!(
            out,
            "  \"{id}\" [label=\"{id}\\nn={n}\\nk={k}\\nsim={sim}\\nresidual={r}\"];",
            id = n.node_id,
            n = n.members.len(),
            k = n.rank_used,
            r = n.residual_members.len()
        );
        for c in &n.children {
            let _ = writeln!(out, "  \"{}\" -> \"{}\";", n.node_id, c.node_id);
        }
    }
    out.push_str("}\n");
    out
}

/// Rows ordered leaf by leaf (depth-first), then residual rows in node order.
pub fn sorted_row_order<T: Scalar>(root: &TreeNode<T>) -> Vec<usize> {
    let mut order = Vec::new();
    let nodes = root.walk();
    for n in &nodes {
        if n.is_leaf() {
            order.extend_from_slice(&n.members);
        }
    }
    for n in &nodes {
        order.extend_from_slice(&n.residual_members);
    }
    order
}

/// Binary 8-bit grayscale PGM, min–max scaled. Header `P5 <cols> <rows> 255`.
pub fn write_pgm<T: Scalar, W: Write>(m: &Matrix<T>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "P5 {} {} 255", m.n_cols(), m.n_rows())?;
    let lo = m.min_entry().widen();
    let hi = m.max_entry().widen();
    let span = hi - lo;
    let bytes: Vec<u8> = m
        .as_slice()
        .iter()
        .map(|v| {
            if span > 0.0 {
                ((v.widen() - lo) / span * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect();
    out.write_all(&bytes)?;
    out.flush()
}
