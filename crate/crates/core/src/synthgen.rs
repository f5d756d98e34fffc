//! Synthetic hierarchical survey populations.
//!
//! Eight groups of respondents arise from three binary splits, each split
//! driven by how much a group discusses one topic; a fourth topic is
//! discussed by everyone. Person-topic weights are zero-truncated normal
//! draws, topic-word weights are normalized multinomial counts. The
//! continuous matrix is the exact product `W H`; the categorical matrix
//! thresholds a product at the per-topic median.

use std::fs;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::{self, matmul, Matrix, SeededRng};

/// Leaf labels in row order: split 1 → `1`/`2`, split 2 → `a`/`b`, split 3 → `1`/`2`.
pub const GROUP_LABELS: [&str; 8] = ["1a1", "1a2", "1b1", "1b2", "2a1", "2a2", "2b1", "2b2"];
pub const N_TOPICS: usize = 4;

const W_STREAM: u64 = 1;
const H_CONTINUOUS_STREAM: u64 = 2;
const H_CATEGORICAL_STREAM: u64 = 3;
const THETA_STREAM: u64 = 4;
const SHUFFLE_STREAM: u64 = 5;

/// Smallest acceptance probability tolerated by the rejection sampler.
const MIN_ACCEPTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalParams {
    pub mu: f64,
    /// Variance, not standard deviation.
    pub sigma2: f64,
}

const fn np(mu: f64, sigma2: f64) -> NormalParams {
    NormalParams { mu, sigma2 }
}

/// Per-split person-topic distributions. Index 0 of each pair is the first
/// branch of the split (`1`, `a`, `1`), index 1 the second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistParams {
    pub split1: [NormalParams; 2],
    pub split2: [NormalParams; 2],
    pub split3: [NormalParams; 2],
    pub shared: NormalParams,
}

impl Default for DistParams {
    fn default() -> Self {
        DistParams {
            split1: [np(64.0, 9.0), np(3.0, 9.0)],
            split2: [np(45.0, 9.0), np(3.0, 9.0)],
            split3: [np(3.0, 9.0), np(50.0, 9.0)],
            shared: np(50.0, 9.0),
        }
    }
}

impl DistParams {
    /// Column distributions for group `g` (index into [`GROUP_LABELS`]).
    pub fn for_group(&self, g: usize) -> [NormalParams; N_TOPICS] {
        let b1 = (g >> 2) & 1;
        let b2 = (g >> 1) & 1;
        let b3 = g & 1;
        [self.split1[b1], self.split2[b2], self.split3[b3], self.shared]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_per_group: usize,
    pub n_groups: usize,
    pub topic_word_counts: Vec<usize>,
    pub dist_params: DistParams,
    pub multinomial_trials: usize,
    /// Odds of a word landing in its own topic versus each other topic.
    pub owner_odds: f64,
    /// θ_g entries are uniform on this interval.
    pub theta_range: (f64, f64),
    /// Permute columns after generation (words no longer contiguous).
    pub shuffle_columns: bool,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn continuous(seed: u64) -> Self {
        SyntheticSpec {
            n_per_group: 200,
            n_groups: GROUP_LABELS.len(),
            topic_word_counts: vec![30, 30, 30, 30],
            dist_params: DistParams::default(),
            multinomial_trials: 100,
            owner_odds: 4.0,
            theta_range: (0.5, 2.0),
            shuffle_columns: false,
            seed,
        }
    }

    pub fn categorical(seed: u64) -> Self {
        SyntheticSpec {
            topic_word_counts: vec![65, 30, 20, 5],
            ..Self::continuous(seed)
        }
    }

    pub fn for_kind(kind: DataKind, seed: u64) -> Self {
        match kind {
            DataKind::Continuous => Self::continuous(seed),
            DataKind::Categorical => Self::categorical(seed),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_per_group * self.n_groups
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_groups != GROUP_LABELS.len() {
            return Err(Error::Parameter(format!(
                "the hierarchy has {} groups, got n_groups = {}",
                GROUP_LABELS.len(),
                self.n_groups
            )));
        }
        if self.n_per_group == 0 || self.multinomial_trials == 0 {
            return Err(Error::Parameter(
                "n_per_group and multinomial_trials must be positive".into(),
            ));
        }
        if self.topic_word_counts.len() != N_TOPICS || self.topic_word_counts.contains(&0) {
            return Err(Error::Parameter(format!(
                "need {N_TOPICS} non-empty topics, got {:?}",
                self.topic_word_counts
            )));
        }
        let d = &self.dist_params;
        for p in d.split1.iter().chain(&d.split2).chain(&d.split3).chain([&d.shared]) {
            if !(p.sigma2 > 0.0) || !(p.mu >= 0.0) {
                return Err(Error::Parameter(format!(
                    "need μ ≥ 0 and σ² > 0, got {p:?}"
                )));
            }
        }
        if !(self.owner_odds > 0.0) || !(self.theta_range.0 <= self.theta_range.1) {
            return Err(Error::Parameter("bad owner_odds or theta_range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub kind: DataKind,
    pub spec: SyntheticSpec,
    pub x: Matrix<f64>,
    pub labels: Vec<String>,
    /// Index into [`GROUP_LABELS`] per row.
    pub group_ids: Vec<usize>,
    /// Ancestor labels per row, e.g. `["1", "1a", "1a1"]`.
    pub hierarchy_path: Vec<Vec<String>>,
    pub w_true: Matrix<f64>,
    pub h_true: Matrix<f64>,
    /// One row per group, `N_TOPICS` coefficients each.
    pub thetas: Matrix<f64>,
    pub y: Vec<f64>,
    /// Owning topic of each column of `x`.
    pub column_topics: Vec<usize>,
}

/// Normal draw conditioned on being strictly positive, by rejection.
pub fn sample_trunc_normal(mu: f64, sigma2: f64, rng: &mut SeededRng) -> Result<f64> {
    if !(sigma2 > 0.0) || !mu.is_finite() {
        return Err(Error::Parameter(format!(
            "truncated normal needs finite μ and σ² > 0, got ({mu}, {sigma2})"
        )));
    }
    let sigma = sigma2.sqrt();
    let accept = Normal::standard().cdf(mu / sigma);
    if accept < MIN_ACCEPTANCE {
        return Err(Error::Parameter(format!(
            "acceptance probability {accept:e} too small for N({mu}, {sigma2}) truncated at 0"
        )));
    }
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let v = mu + sigma * z;
        if v > 0.0 {
            return Ok(v);
        }
    }
}

/// Person-topic matrix with groups in [`GROUP_LABELS`] order.
pub fn gen_w_true(
    spec: &SyntheticSpec,
    rng: &mut SeededRng,
) -> Result<(Matrix<f64>, Vec<String>, Vec<Vec<String>>)> {
    spec.validate()?;
    let n = spec.n_rows();
    let mut data = Vec::with_capacity(n * N_TOPICS);
    let mut labels = Vec::with_capacity(n);
    let mut paths = Vec::with_capacity(n);
    for (g, label) in GROUP_LABELS.iter().enumerate() {
        let params = spec.dist_params.for_group(g);
        let path = vec![label[..1].to_string(), label[..2].to_string(), label.to_string()];
        for _ in 0..spec.n_per_group {
            for p in &params {
                data.push(sample_trunc_normal(p.mu, p.sigma2, rng)?);
            }
            labels.push(label.to_string());
            paths.push(path.clone());
        }
    }
    Ok((Matrix::new(n, N_TOPICS, data)?, labels, paths))
}

/// Topic-word matrix: each word's column is a multinomial count vector over
/// topics (owner topic favored by `owner_odds`), divided by the trial count.
pub fn gen_h(
    topic_word_counts: &[usize],
    trials: usize,
    owner_odds: f64,
    rng: &mut SeededRng,
) -> Matrix<f64> {
    let k = topic_word_counts.len();
    let m: usize = topic_word_counts.iter().sum();
    let mut h = Matrix::zeros(k, m);
    let mut col = 0;
    for (owner, &count) in topic_word_counts.iter().enumerate() {
        let total = owner_odds + (k - 1) as f64;
        let probs: Vec<f64> = (0..k)
            .map(|t| if t == owner { owner_odds / total } else { 1.0 / total })
            .collect();
        for _ in 0..count {
            let mut counts = vec![0usize; k];
            for _ in 0..trials {
                let u = rng.uniform();
                let mut acc = 0.0;
                let mut pick = k - 1;
                for (t, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = t;
                        break;
                    }
                }
                counts[pick] += 1;
            }
            for (t, c) in counts.into_iter().enumerate() {
                h.set(t, col, c as f64 / trials as f64);
            }
            col += 1;
        }
    }
    h
}

pub fn gen_h_continuous(spec: &SyntheticSpec, rng: &mut SeededRng) -> Matrix<f64> {
    gen_h(
        &spec.topic_word_counts,
        spec.multinomial_trials,
        spec.owner_odds,
        rng,
    )
}

/// `θ_g`, one row per group.
pub fn gen_thetas(spec: &SyntheticSpec, rng: &mut SeededRng) -> Matrix<f64> {
    let (lo, hi) = spec.theta_range;
    Matrix::from_fn(spec.n_groups, N_TOPICS, |_, _| lo + (hi - lo) * rng.uniform())
}

/// `y_i = ⟨w_i, θ_{g(i)}⟩`.
pub fn gen_response(w_true: &Matrix<f64>, thetas: &Matrix<f64>, group_ids: &[usize]) -> Result<Vec<f64>> {
    if w_true.n_cols() != thetas.n_cols() || group_ids.len() != w_true.n_rows() {
        return Err(Error::shape(
            "gen_response",
            format!(
                "W {:?}, thetas {:?}, {} group ids",
                w_true.shape(),
                thetas.shape(),
                group_ids.len()
            ),
        ));
    }
    group_ids
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            if g >= thetas.n_rows() {
                return Err(Error::Validation(format!("group id {g} has no θ")));
            }
            Ok(linalg::dot(w_true.row(i), thetas.row(g)))
        })
        .collect()
}

fn topic_of_columns(counts: &[usize]) -> Vec<usize> {
    counts
        .iter()
        .enumerate()
        .flat_map(|(t, &c)| std::iter::repeat_n(t, c))
        .collect()
}

/// Shared part of both generators: W, labels, θ and y.
struct Population {
    w: Matrix<f64>,
    labels: Vec<String>,
    group_ids: Vec<usize>,
    paths: Vec<Vec<String>>,
    thetas: Matrix<f64>,
    y: Vec<f64>,
}

fn population(spec: &SyntheticSpec) -> Result<Population> {
    let mut w_rng = SeededRng::new(spec.seed, W_STREAM);
    let (w, labels, paths) = gen_w_true(spec, &mut w_rng)?;
    let group_ids: Vec<usize> = (0..spec.n_groups)
        .flat_map(|g| std::iter::repeat_n(g, spec.n_per_group))
        .collect();
    let thetas = gen_thetas(spec, &mut SeededRng::new(spec.seed, THETA_STREAM));
    let y = gen_response(&w, &thetas, &group_ids)?;
    Ok(Population {
        w,
        labels,
        group_ids,
        paths,
        thetas,
        y,
    })
}

fn maybe_shuffle(
    spec: &SyntheticSpec,
    x: Matrix<f64>,
    h: Matrix<f64>,
    topics: Vec<usize>,
) -> (Matrix<f64>, Matrix<f64>, Vec<usize>) {
    if !spec.shuffle_columns {
        return (x, h, topics);
    }
    let mut perm: Vec<usize> = (0..x.n_cols()).collect();
    SeededRng::new(spec.seed, SHUFFLE_STREAM).shuffle(&mut perm);
    let topics = perm.iter().map(|&j| topics[j]).collect();
    (x.select_cols(&perm), h.select_cols(&perm), topics)
}

pub fn gen_continuous(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let pop = population(spec)?;
    let h = gen_h_continuous(spec, &mut SeededRng::new(spec.seed, H_CONTINUOUS_STREAM));
    let x = matmul(&pop.w, &h)?;
    let (x, h, column_topics) = maybe_shuffle(spec, x, h, topic_of_columns(&spec.topic_word_counts));
    Ok(SyntheticDataset {
        kind: DataKind::Continuous,
        spec: spec.clone(),
        x,
        labels: pop.labels,
        group_ids: pop.group_ids,
        hierarchy_path: pop.paths,
        w_true: pop.w,
        h_true: h,
        thetas: pop.thetas,
        y: pop.y,
        column_topics,
    })
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn gen_categorical(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let pop = population(spec)?;
    let h = gen_h_continuous(spec, &mut SeededRng::new(spec.seed, H_CATEGORICAL_STREAM));
    let product = matmul(&pop.w, &h)?;
    let topics = topic_of_columns(&spec.topic_word_counts);
    let mut x = Matrix::zeros(product.n_rows(), product.n_cols());
    let mut start = 0;
    for &count in &spec.topic_word_counts {
        let cols = start..start + count;
        let mut block: Vec<f64> = (0..product.n_rows())
            .flat_map(|i| product.row(i)[cols.clone()].to_vec())
            .collect();
        let med = median(&mut block);
        for i in 0..product.n_rows() {
            for j in cols.clone() {
                if product.get(i, j) > med {
                    x.set(i, j, 1.0);
                }
            }
        }
        start += count;
    }
    let (x, h, column_topics) = maybe_shuffle(spec, x, h, topics);
    Ok(SyntheticDataset {
        kind: DataKind::Categorical,
        spec: spec.clone(),
        x,
        labels: pop.labels,
        group_ids: pop.group_ids,
        hierarchy_path: pop.paths,
        w_true: pop.w,
        h_true: h,
        thetas: pop.thetas,
        y: pop.y,
        column_topics,
    })
}

pub fn generate(kind: DataKind, spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    match kind {
        DataKind::Continuous => gen_continuous(spec),
        DataKind::Categorical => gen_categorical(spec),
    }
}

fn write_lines<I: IntoIterator<Item = String>>(path: &Path, lines: I) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(&l);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

impl SyntheticDataset {
    /// Writes X, labels, W_true, H_true, thetas, y (CSV) and spec.json; returns
    /// the written paths.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let mut save = |name: &str, m: &Matrix<f64>| -> Result<()> {
            let p = dir.join(name);
            linalg::io::save_csv(m, &p)?;
            written.push(p);
            Ok(())
        };
        save("X.csv", &self.x)?;
        save("W_true.csv", &self.w_true)?;
        save("H_true.csv", &self.h_true)?;
        save("thetas.csv", &self.thetas)?;
        let p = dir.join("labels.csv");
        write_lines(&p, self.labels.iter().cloned())?;
        written.push(p);
        let p = dir.join("y.csv");
        write_lines(&p, self.y.iter().map(|v| v.to_string()))?;
        written.push(p);
        let p = dir.join("spec.json");
        let meta = serde_json::json!({
            "kind": self.kind,
            "spec": self.spec,
            "column_topics": self.column_topics,
        });
        fs::write(&p, serde_json::to_string_pretty(&meta).expect("spec serializes"))
            .map_err(|e| Error::io(&p, e))?;
        written.push(p);
        Ok(written)
    }
}
