//! Stability of NMF features across re-seeded runs, and rank selection.
//!
//! For a fixed rank, `n_seeds` factorizations are computed from seeds derived
//! from the configured master seed. Every unordered pair of runs is aligned by
//! an optimal row matching of their `H` factors; the pair's statistic is the
//! least cosine among matched rows, and the score is the minimum of those
//! statistics over all pairs.

mod assignment;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use assignment::{max_weight_assignment, min_cost_assignment};

use crate::error::{Error, Result};
use crate::linalg::{cosine_similarity, derive_seed, Matrix};
use crate::nmf::{nmf, Factorization, NmfConfig};
use crate::scalar::Scalar;

pub const DEFAULT_N_SEEDS: usize = 10;
pub const DEFAULT_K_MIN: usize = 2;
pub const DEFAULT_K_MAX: usize = 8;

/// Optimal pairing of the rows of two `H` factors.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMatching<T> {
    /// `assignment[i] = j`: row `i` of the first factor pairs with row `j` of the second.
    pub assignment: Vec<usize>,
    /// Cosine of each matched pair, indexed like `assignment`.
    pub cosines: Vec<T>,
    pub min_matched_cosine: T,
    /// Some matched row had zero norm.
    pub degenerate: bool,
}

pub fn match_rows<T: Scalar>(h_a: &Matrix<T>, h_b: &Matrix<T>) -> Result<RowMatching<T>> {
    if h_a.shape() != h_b.shape() {
        return Err(Error::shape(
            "match_rows",
            format!("{:?} vs {:?}", h_a.shape(), h_b.shape()),
        ));
    }
    let k = h_a.n_rows();
    let mut degenerate = false;
    let mut sim = vec![vec![0.0f64; k]; k];
    for (i, row) in sim.iter_mut().enumerate() {
        for (j, s) in row.iter_mut().enumerate() {
            let c = cosine_similarity(h_a.row(i), h_b.row(j))?;
            degenerate |= c.degenerate;
            *s = c.value.widen();
        }
    }
    let assignment = max_weight_assignment(&sim);
    let cosines: Vec<T> = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| T::narrow(sim[i][j]))
        .collect();
    let min_matched_cosine = cosines.iter().copied().fold(T::infinity(), T::min);
    Ok(RowMatching {
        assignment,
        cosines,
        min_matched_cosine: if k == 0 { T::one() } else { min_matched_cosine },
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport<T> {
    pub rank: usize,
    pub n_seeds: usize,
    pub seeds: Vec<u64>,
    /// Symmetric `n_seeds × n_seeds`; entry `(a, b)` is the least matched-row
    /// cosine between runs `a` and `b`. The diagonal is 1.
    pub per_pair_min: Vec<Vec<T>>,
    pub score: T,
    /// Number of run pairs where a zero `H` row forced a 0 cosine.
    pub degenerate_pairs: usize,
}

impl<T: Scalar> SimilarityReport<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Seeds for the similarity runs: `derive_seed(master, run_index)`.
pub fn run_seeds(master: u64, n_seeds: usize) -> Vec<u64> {
    (0..n_seeds as u64).map(|i| derive_seed(master, i)).collect()
}

pub fn feature_similarity<T: Scalar>(
    x: &Matrix<T>,
    k: usize,
    n_seeds: usize,
    config: &NmfConfig,
) -> Result<SimilarityReport<T>> {
    if n_seeds < 2 {
        return Err(Error::Parameter("feature similarity needs n_seeds ≥ 2".into()));
    }
    let seeds = run_seeds(config.seed, n_seeds);
    Ok(similarity_runs(x, k, &seeds, config)?.0)
}

/// Like [`feature_similarity`] with explicit per-run seeds.
pub fn feature_similarity_with_seeds<T: Scalar>(
    x: &Matrix<T>,
    k: usize,
    seeds: &[u64],
    config: &NmfConfig,
) -> Result<SimilarityReport<T>> {
    if seeds.len() < 2 {
        return Err(Error::Parameter("feature similarity needs n_seeds ≥ 2".into()));
    }
    Ok(similarity_runs(x, k, seeds, config)?.0)
}

/// Runs the factorizations and scores them. The factorizations are returned
/// in seed order.
pub(crate) fn similarity_runs<T: Scalar>(
    x: &Matrix<T>,
    k: usize,
    seeds: &[u64],
    config: &NmfConfig,
) -> Result<(SimilarityReport<T>, Vec<Factorization<T>>)> {
    let runs: Vec<Factorization<T>> = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = NmfConfig {
                rank: k,
                seed,
                ..config.clone()
            };
            nmf(x, &cfg).map_err(|e| Error::SeedRun {
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let n = runs.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .collect();
    let matched: Vec<RowMatching<T>> = pairs
        .par_iter()
        .map(|&(a, b)| match_rows(&runs[a].h, &runs[b].h))
        .collect::<Result<_>>()?;

    let mut per_pair_min = vec![vec![T::one(); n]; n];
    let mut score = T::one();
    let mut degenerate_pairs = 0;
    for (&(a, b), m) in pairs.iter().zip(&matched) {
        per_pair_min[a][b] = m.min_matched_cosine;
        per_pair_min[b][a] = m.min_matched_cosine;
        score = score.min(m.min_matched_cosine);
        degenerate_pairs += usize::from(m.degenerate);
    }
    let report = SimilarityReport {
        rank: k,
        n_seeds: n,
        seeds: seeds.to_vec(),
        per_pair_min,
        score,
        degenerate_pairs,
    };
    Ok((report, runs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSelection<T> {
    pub candidate_scores: BTreeMap<usize, T>,
    pub chosen_k: usize,
    pub chosen_score: T,
}

/// Largest usable candidate rank for `x`, erroring when `k_min` is infeasible.
fn candidate_ranks<T: Scalar>(x: &Matrix<T>, k_min: usize, k_max: usize) -> Result<Vec<usize>> {
    if k_min < 2 || k_min > k_max {
        return Err(Error::Parameter(format!(
            "rank range {k_min}..={k_max} must satisfy 2 ≤ k_min ≤ k_max"
        )));
    }
    let cap = x.n_rows().min(x.n_cols());
    if k_min > cap {
        return Err(Error::Validation(format!(
            "matrix {}x{} is too small for rank {k_min}",
            x.n_rows(),
            x.n_cols()
        )));
    }
    Ok((k_min..=k_max.min(cap)).collect())
}

pub fn select_rank<T: Scalar>(
    x: &Matrix<T>,
    k_min: usize,
    k_max: usize,
    n_seeds: usize,
    config: &NmfConfig,
) -> Result<RankSelection<T>> {
    if n_seeds < 2 {
        return Err(Error::Parameter("rank selection needs n_seeds ≥ 2".into()));
    }
    let seeds = run_seeds(config.seed, n_seeds);
    Ok(select_rank_runs(x, k_min, k_max, &seeds, config)?.0)
}

/// [`select_rank`] plus the similarity report of the chosen rank.
pub fn select_rank_with_report<T: Scalar>(
    x: &Matrix<T>,
    k_min: usize,
    k_max: usize,
    n_seeds: usize,
    config: &NmfConfig,
) -> Result<(RankSelection<T>, SimilarityReport<T>)> {
    if n_seeds < 2 {
        return Err(Error::Parameter("rank selection needs n_seeds ≥ 2".into()));
    }
    let seeds = run_seeds(config.seed, n_seeds);
    let (sel, report, _) = select_rank_runs(x, k_min, k_max, &seeds, config)?;
    Ok((sel, report))
}

pub fn select_rank_with_seeds<T: Scalar>(
    x: &Matrix<T>,
    k_min: usize,
    k_max: usize,
    seeds: &[u64],
    config: &NmfConfig,
) -> Result<RankSelection<T>> {
    if seeds.len() < 2 {
        return Err(Error::Parameter("rank selection needs n_seeds ≥ 2".into()));
    }
    Ok(select_rank_runs(x, k_min, k_max, seeds, config)?.0)
}

/// Scores every candidate and keeps the winning rank's report and runs.
pub(crate) fn select_rank_runs<T: Scalar>(
    x: &Matrix<T>,
    k_min: usize,
    k_max: usize,
    seeds: &[u64],
    config: &NmfConfig,
) -> Result<(RankSelection<T>, SimilarityReport<T>, Vec<Factorization<T>>)> {
    let ks = candidate_ranks(x, k_min, k_max)?;
    let mut best: Option<(SimilarityReport<T>, Vec<Factorization<T>>)> = None;
    let mut candidate_scores = BTreeMap::new();
    for k in ks {
        let (report, runs) = similarity_runs(x, k, seeds, config)?;
        candidate_scores.insert(k, report.score);
        // strict comparison keeps the smaller k on ties
        if best.as_ref().is_none_or(|(b, _)| report.score > b.score) {
            best = Some((report, runs));
        }
    }
    let (report, runs) = best.expect("at least one candidate rank");
    let selection = RankSelection {
        candidate_scores,
        chosen_k: report.rank,
        chosen_score: report.score,
    };
    Ok((selection, report, runs))
}
