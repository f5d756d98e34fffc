use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{derive_seed, Matrix};
use crate::model_select::{run_seeds, select_rank_runs, similarity_runs};
use crate::nmf::{nmf, validate_nonnegative, Factorization, NmfConfig};
use crate::scalar::Scalar;

use super::{
    assign_hard_with, assign_soft_with, child_id, HnmfConfig, LeafReason, PopulationTree,
    RankPolicy, Termination, TopicTree, TreeNode,
};

const ROOT_ID: &str = "root";

fn check_input<T: Scalar>(x: &Matrix<T>) -> Result<()> {
    if x.n_rows() == 0 || x.n_cols() == 0 {
        return Err(Error::Validation(format!(
            "cannot build a tree from an empty {}x{} matrix",
            x.n_rows(),
            x.n_cols()
        )));
    }
    validate_nonnegative(x)
}

/// Lowest final objective wins; ties keep the earlier run.
fn best_run<T: Scalar>(runs: Vec<Factorization<T>>) -> Factorization<T> {
    runs.into_iter()
        .reduce(|best, f| {
            if f.final_objective() < best.final_objective() {
                f
            } else {
                best
            }
        })
        .expect("at least one run")
}

/// Population-based hierarchical NMF with hard splits.
pub fn phnmf<T: Scalar>(x: &Matrix<T>, config: &HnmfConfig) -> Result<PopulationTree<T>> {
    config.validate()?;
    let Termination::Similarity { beta } = config.termination else {
        return Err(Error::Parameter(
            "phnmf terminates on feature similarity; configure beta".into(),
        ));
    };
    check_input(x)?;
    let ctx = Ctx { x, config, beta };
    let root = ctx.population_node(
        ROOT_ID.to_string(),
        0,
        (0..x.n_rows()).collect(),
        None,
        config.nmf.seed,
    )?;
    Ok(PopulationTree {
        root,
        n_rows: x.n_rows(),
        n_cols: x.n_cols(),
    })
}

struct Ctx<'a, T> {
    x: &'a Matrix<T>,
    config: &'a HnmfConfig,
    beta: f64,
}

impl<T: Scalar> Ctx<'_, T> {
    fn too_small(&self, members: usize) -> bool {
        let k = self.config.rank_policy.min_rank();
        members < k.max(2) || self.x.n_cols() < k
    }

    fn population_node(
        &self,
        id: String,
        depth: usize,
        members: Vec<usize>,
        parent_topic: Option<usize>,
        seed: u64,
    ) -> Result<TreeNode<T>> {
        let cfg = self.config;
        let mut node = TreeNode::new(id, depth, members, parent_topic);
        if depth >= cfg.max_depth {
            node.leaf_reason = Some(LeafReason::MaxDepth);
            return Ok(node);
        }
        if self.too_small(node.members.len()) {
            node.leaf_reason = Some(LeafReason::TooFewMembers);
            return Ok(node);
        }

        let sub = self.x.select_rows(&node.members);
        let nmf_cfg = NmfConfig {
            seed,
            ..cfg.nmf.clone()
        };
        let seeds = run_seeds(seed, cfg.n_seeds);
        let (report, runs) = match cfg.rank_policy {
            RankPolicy::Fixed { k } => similarity_runs(&sub, k, &seeds, &nmf_cfg)?,
            RankPolicy::Auto { k_min, k_max } => {
                let (sel, report, runs) = select_rank_runs(&sub, k_min, k_max, &seeds, &nmf_cfg)?;
                node.rank_scores = Some(sel.candidate_scores);
                (report, runs)
            }
        };
        let best = best_run(runs);
        node.rank_used = report.rank;
        node.similarity_score = Some(report.score);
        let w = best.w;
        node.h_local = Some(best.h);

        if report.score.widen() <= self.beta {
            node.w_local = Some(w);
            node.leaf_reason = Some(LeafReason::SimilarityAtOrBelowBeta);
            return Ok(node);
        }

        let hard = assign_hard_with(&w, &cfg.alpha.thresholds(&w));
        node.residual_members = hard.residuals.iter().map(|&l| node.members[l]).collect();
        let groups: Vec<(usize, Vec<usize>)> = hard
            .groups(w.n_cols())
            .into_iter()
            .enumerate()
            .filter(|(_, g)| !g.is_empty())
            .map(|(j, g)| (j, g.into_iter().map(|l| node.members[l]).collect()))
            .collect();
        node.w_local = Some(w);
        if groups.len() < 2 {
            node.leaf_reason = Some(LeafReason::DegenerateSplit);
            return Ok(node);
        }

        let parent_id = node.node_id.clone();
        node.children = groups
            .into_par_iter()
            .enumerate()
            .map(|(ord, (topic, mem))| {
                self.population_node(
                    child_id(&parent_id, depth + 1, ord),
                    depth + 1,
                    mem,
                    Some(topic),
                    derive_seed(seed, ord as u64 + 1),
                )
            })
            .collect::<Result<_>>()?;
        Ok(node)
    }
}

/// Top-down hierarchical NMF with soft (overlapping) topic membership.
pub fn hnmf_topdown<T: Scalar>(x: &Matrix<T>, config: &HnmfConfig) -> Result<TopicTree<T>> {
    config.validate()?;
    let Termination::MinDocs { min_docs } = config.termination else {
        return Err(Error::Parameter(
            "top-down HNMF terminates on topic size; configure min_docs".into(),
        ));
    };
    check_input(x)?;
    let ctx = TopicCtx {
        x,
        config,
        min_docs,
    };
    let root = ctx.topic_node(
        ROOT_ID.to_string(),
        0,
        (0..x.n_rows()).collect(),
        None,
        config.nmf.seed,
    )?;
    Ok(TopicTree {
        root,
        n_rows: x.n_rows(),
        n_cols: x.n_cols(),
    })
}

struct TopicCtx<'a, T> {
    x: &'a Matrix<T>,
    config: &'a HnmfConfig,
    min_docs: usize,
}

impl<T: Scalar> TopicCtx<'_, T> {
    fn topic_node(
        &self,
        id: String,
        depth: usize,
        members: Vec<usize>,
        parent_topic: Option<usize>,
        seed: u64,
    ) -> Result<TreeNode<T>> {
        let cfg = self.config;
        let mut node = TreeNode::new(id, depth, members, parent_topic);
        if node.members.len() < self.min_docs {
            node.leaf_reason = Some(LeafReason::BelowMinDocs);
            return Ok(node);
        }
        if depth >= cfg.max_depth {
            node.leaf_reason = Some(LeafReason::MaxDepth);
            return Ok(node);
        }
        let k_floor = cfg.rank_policy.min_rank();
        if node.members.len() < k_floor.max(2) || self.x.n_cols() < k_floor {
            node.leaf_reason = Some(LeafReason::TooFewMembers);
            return Ok(node);
        }

        let sub = self.x.select_rows(&node.members);
        let nmf_cfg = NmfConfig {
            seed,
            ..cfg.nmf.clone()
        };
        let fact = match cfg.rank_policy {
            RankPolicy::Fixed { k } => nmf(&sub, &nmf_cfg.clone().with_rank(k))?,
            RankPolicy::Auto { k_min, k_max } => {
                let seeds = run_seeds(seed, cfg.n_seeds.max(2));
                let (sel, report, runs) = select_rank_runs(&sub, k_min, k_max, &seeds, &nmf_cfg)?;
                node.rank_scores = Some(sel.candidate_scores);
                node.similarity_score = Some(report.score);
                best_run(runs)
            }
        };
        node.rank_used = fact.rank;
        let w = fact.w;
        node.h_local = Some(fact.h);

        let soft = assign_soft_with(&w, &cfg.alpha.thresholds(&w));
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); w.n_cols()];
        for (l, topics) in soft.iter().enumerate() {
            if topics.is_empty() {
                node.residual_members.push(node.members[l]);
            }
            for &j in topics {
                groups[j].push(node.members[l]);
            }
        }
        node.w_local = Some(w);
        let groups: Vec<(usize, Vec<usize>)> = groups
            .into_iter()
            .enumerate()
            .filter(|(_, g)| !g.is_empty())
            .collect();
        if groups.is_empty() || (groups.len() == 1 && groups[0].1.len() == node.members.len()) {
            node.leaf_reason = Some(LeafReason::DegenerateSplit);
            return Ok(node);
        }

        let parent_id = node.node_id.clone();
        node.children = groups
            .into_par_iter()
            .enumerate()
            .map(|(ord, (topic, mem))| {
                self.topic_node(
                    child_id(&parent_id, depth + 1, ord),
                    depth + 1,
                    mem,
                    Some(topic),
                    derive_seed(seed, ord as u64 + 1),
                )
            })
            .collect::<Result<_>>()?;
        Ok(node)
    }
}
