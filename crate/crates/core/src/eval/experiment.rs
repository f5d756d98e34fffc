//! Replicate drivers for the synthetic accuracy and regression experiments.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{phnmf, HnmfConfig, RankPolicy};
use crate::linalg::derive_seed;
use crate::synthgen::{generate, DataKind, SyntheticDataset, SyntheticSpec, GROUP_LABELS};

use super::{coeff_alignment, label_match_accuracy, ols, ridge_cv, AlignmentRow, CvConfig, RegressionFit};

/// PHNMF settings used by the experiments: fixed rank 2 per level unless
/// `auto_rank` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: DataKind,
    pub tree: HnmfConfig,
    pub cv: CvConfig,
}

impl ExperimentConfig {
    pub fn new(kind: DataKind, auto_rank: bool) -> Self {
        let mut tree = HnmfConfig::phnmf(crate::hierarchy::DEFAULT_BETA);
        if !auto_rank {
            tree = tree.with_rank_policy(RankPolicy::Fixed { k: 2 });
        }
        ExperimentConfig {
            kind,
            tree,
            cv: CvConfig::default(),
        }
    }
}

/// Data seed of replicate `r`; the tree seed is derived from it.
pub fn replicate_seed(master: u64, r: usize) -> u64 {
    derive_seed(master, r as u64)
}

fn replicate_data(cfg: &ExperimentConfig, seed: u64) -> Result<(SyntheticDataset, HnmfConfig)> {
    let ds = generate(cfg.kind, &SyntheticSpec::for_kind(cfg.kind, seed))?;
    let tree = cfg.tree.clone().with_seed(derive_seed(seed, 1));
    Ok((ds, tree))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub replicate: usize,
    pub seed: u64,
    pub accuracy_assigned: f64,
    pub accuracy_total: f64,
    pub n_leaves: usize,
    pub n_residual: usize,
}

pub fn accuracy_replicate(cfg: &ExperimentConfig, replicate: usize, master: u64) -> Result<AccuracyRow> {
    let seed = replicate_seed(master, replicate);
    let (ds, tree_cfg) = replicate_data(cfg, seed)?;
    let tree = phnmf(&ds.x, &tree_cfg).map_err(|e| e.in_seed_run(seed))?;
    let leaves = tree.leaves();
    let report = label_match_accuracy(&leaves, &tree.all_residuals(), &ds.labels)?;
    Ok(AccuracyRow {
        replicate,
        seed,
        accuracy_assigned: report.accuracy_assigned,
        accuracy_total: report.accuracy_total,
        n_leaves: leaves.len(),
        n_residual: report.n_residual,
    })
}

/// All replicates, in replicate order regardless of scheduling.
pub fn accuracy_experiment(cfg: &ExperimentConfig, replicates: usize, master: u64) -> Result<Vec<AccuracyRow>> {
    if replicates == 0 {
        return Err(Error::Parameter("replicates must be at least 1".into()));
    }
    (0..replicates)
        .into_par_iter()
        .map(|r| accuracy_replicate(cfg, r, master))
        .collect()
}

/// Per-group coefficient alignment for one replicate, plus the fits behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub seed: u64,
    pub rows: Vec<AlignmentRow>,
    pub population: RegressionFit,
    pub subgroups: BTreeMap<String, RegressionFit>,
    /// Subgroup sizes after pooling leaves by modal label.
    pub subgroup_sizes: BTreeMap<String, usize>,
    /// Groups that no leaf recovered.
    pub missing_groups: Vec<String>,
}

impl RegressionResult {
    /// Groups where the subgroup fit is closer to the truth than the population fit.
    pub fn n_subgroup_wins(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| match (r.subgroup_vs_truth, r.population_vs_truth) {
                (Some(s), Some(p)) => s > p,
                _ => false,
            })
            .count()
    }
}

/// Fits `y` on the true loadings `W` for the whole population and for each
/// PHNMF subgroup (leaves pooled by modal label), then compares coefficient
/// directions against each group's θ. Continuous data uses OLS, categorical
/// uses cross-validated ridge.
pub fn regression_replicate(cfg: &ExperimentConfig, seed: u64) -> Result<RegressionResult> {
    let (ds, tree_cfg) = replicate_data(cfg, seed)?;
    let tree = phnmf(&ds.x, &tree_cfg).map_err(|e| e.in_seed_run(seed))?;
    let leaves = tree.leaves();
    let report = label_match_accuracy(&leaves, &tree.all_residuals(), &ds.labels)?;

    let mut pooled: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (id, members) in &leaves {
        if let Some(label) = report.leaf_to_label.get(id) {
            pooled.entry(label.clone()).or_default().extend(members);
        }
    }
    let cv = CvConfig {
        seed: derive_seed(seed, 2),
        ..cfg.cv.clone()
    };
    let fit = |rows: &[usize]| -> Result<RegressionFit> {
        let x = ds.w_true.select_rows(rows);
        let y: Vec<f64> = rows.iter().map(|&i| ds.y[i]).collect();
        match cfg.kind {
            DataKind::Continuous => ols(&x, &y),
            DataKind::Categorical => ridge_cv(&x, &y, &cv),
        }
    };
    let all: Vec<usize> = (0..ds.x.n_rows()).collect();
    let population = fit(&all)?;
    let mut subgroups = BTreeMap::new();
    let mut subgroup_sizes = BTreeMap::new();
    for (label, mut rows) in pooled {
        rows.sort_unstable();
        subgroup_sizes.insert(label.clone(), rows.len());
        match fit(&rows) {
            Ok(f) => {
                subgroups.insert(label, f);
            }
            Err(e) => log::warn!("subgroup {label}: fit failed: {e}"),
        }
    }
    let truths: BTreeMap<String, Vec<f64>> = GROUP_LABELS
        .iter()
        .enumerate()
        .map(|(g, l)| (l.to_string(), ds.thetas.row(g).to_vec()))
        .collect();
    let missing_groups = GROUP_LABELS
        .iter()
        .filter(|l| !subgroups.contains_key(**l))
        .map(|l| l.to_string())
        .collect();
    let rows = coeff_alignment(&subgroups, &population, Some(&truths))?;
    Ok(RegressionResult {
        seed,
        rows,
        population,
        subgroups,
        subgroup_sizes,
        missing_groups,
    })
}
