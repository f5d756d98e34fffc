//! Non-negative matrix factorization by multiplicative updates.
//!
//! Each iteration updates `H`, then `W`, then records `½‖X − WH‖²_F`.
//! The denominator guard `mu_epsilon` is added, never used as a clamp, so
//! exact fixed points stay fixed up to rounding.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, half_sq_residual, matmul, matmul_nt, matmul_tn, Matrix, SeededRng};
use crate::scalar::Scalar;

/// Lower bound of the uniform initialization interval `(INIT_FLOOR, 1]`.
pub const INIT_FLOOR: f64 = 1e-6;

/// Stream id used for factor initialization.
const INIT_STREAM: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    pub rank: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub mu_epsilon: f64,
    pub seed: u64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        NmfConfig {
            rank: 2,
            max_iters: 300,
            rel_tol: 1e-4,
            mu_epsilon: 1e-12,
            seed: 0,
        }
    }
}

impl NmfConfig {
    pub fn with_rank(mut self, rank: usize) -> Self {
        self.rank = rank;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, n_rows: usize, n_cols: usize) -> Result<()> {
        if self.rank == 0 || self.rank > n_rows.min(n_cols) {
            return Err(Error::Parameter(format!(
                "rank {} not in 1..={} for a {n_rows}x{n_cols} matrix",
                self.rank,
                n_rows.min(n_cols)
            )));
        }
        if !(self.rel_tol > 0.0) || !(self.mu_epsilon > 0.0) {
            return Err(Error::Parameter(
                "rel_tol and mu_epsilon must be positive".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Factorization<T> {
    pub w: Matrix<T>,
    pub h: Matrix<T>,
    pub objective_history: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    pub seed: u64,
    pub rank: usize,
}

impl<T: Scalar> Factorization<T> {
    pub fn final_objective(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(f64::NAN)
    }

    /// `‖X − WH‖_F / ‖X‖_F` (0 when X is zero and the fit is exact).
    pub fn relative_residual(&self, x: &Matrix<T>) -> Result<f64> {
        let r = (2.0 * half_sq_residual(x, &self.w, &self.h)?).sqrt();
        let nx = x.sum_sq().sqrt();
        Ok(if nx == 0.0 { r } else { r / nx })
    }

    /// Writes `W.csv`, `H.csv` and `meta.json` into `dir`.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        linalg::io::save_csv(&self.w, dir.join("W.csv"))?;
        linalg::io::save_csv(&self.h, dir.join("H.csv"))?;
        let meta = FactorizationMeta {
            rank: self.rank,
            seed: self.seed,
            iterations: self.iterations_run,
            converged: self.converged,
            final_objective: self.final_objective(),
            scalar: T::NAME.to_string(),
        };
        let path = dir.join("meta.json");
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FactorizationMeta {
    pub rank: usize,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub scalar: String,
}

/// Draws `W` (n×k) then `H` (k×m), entries i.i.d. uniform on `(INIT_FLOOR, 1]`.
pub fn init_factors<T: Scalar>(
    n: usize,
    m: usize,
    k: usize,
    rng: &mut SeededRng,
) -> Result<(Matrix<T>, Matrix<T>)> {
    if n == 0 || m == 0 || k == 0 || k > n.min(m) {
        return Err(Error::shape(
            "init_factors",
            format!("cannot factor {n}x{m} at rank {k}"),
        ));
    }
    let mut draw = || T::narrow(rng.uniform_open_closed(INIT_FLOOR, 1.0));
    let w = Matrix::from_fn(n, k, |_, _| draw());
    let h = Matrix::from_fn(k, m, |_, _| draw());
    Ok((w, h))
}

fn check_shapes<T: Scalar>(x: &Matrix<T>, w: &Matrix<T>, h: &Matrix<T>, op: &'static str) -> Result<()> {
    if w.n_rows() != x.n_rows() || h.n_cols() != x.n_cols() || w.n_cols() != h.n_rows() {
        return Err(Error::shape(
            op,
            format!("X {:?}, W {:?}, H {:?}", x.shape(), w.shape(), h.shape()),
        ));
    }
    Ok(())
}

fn multiplicative_step<T: Scalar>(
    base: &Matrix<T>,
    numer: &Matrix<T>,
    denom: &Matrix<T>,
    mu_epsilon: f64,
) -> Matrix<T> {
    let mut out = base.clone();
    for ((o, &n), &d) in out
        .data_mut()
        .iter_mut()
        .zip(numer.as_slice())
        .zip(denom.as_slice())
    {
        *o = T::narrow(o.widen() * n.widen() / (d.widen() + mu_epsilon));
    }
    out
}

/// `H ← H ⊙ (WᵀX) ⊘ (WᵀWH + ε)`.
pub fn mu_update_h<T: Scalar>(
    x: &Matrix<T>,
    w: &Matrix<T>,
    h: &Matrix<T>,
    mu_epsilon: f64,
) -> Result<Matrix<T>> {
    check_shapes(x, w, h, "mu_update_h")?;
    let wtx = matmul_tn(w, x)?;
    let wtw = matmul_tn(w, w)?;
    let wtwh = matmul(&wtw, h)?;
    Ok(multiplicative_step(h, &wtx, &wtwh, mu_epsilon))
}

/// `W ← W ⊙ (XHᵀ) ⊘ (WHHᵀ + ε)`.
pub fn mu_update_w<T: Scalar>(
    x: &Matrix<T>,
    w: &Matrix<T>,
    h: &Matrix<T>,
    mu_epsilon: f64,
) -> Result<Matrix<T>> {
    check_shapes(x, w, h, "mu_update_w")?;
    let xht = matmul_nt(x, h)?;
    let hht = matmul_nt(h, h)?;
    let whht = matmul(w, &hht)?;
    Ok(multiplicative_step(w, &xht, &whht, mu_epsilon))
}

/// Rejects matrices with negative entries.
pub fn validate_nonnegative<T: Scalar>(x: &Matrix<T>) -> Result<()> {
    match x.first_negative() {
        Some((i, j, v)) => Err(Error::Validation(format!(
            "negative entry {v} at ({i}, {j}); NMF needs X ≥ 0"
        ))),
        None => Ok(()),
    }
}

pub fn nmf<T: Scalar>(x: &Matrix<T>, config: &NmfConfig) -> Result<Factorization<T>> {
    validate_nonnegative(x)?;
    config.validate(x.n_rows(), x.n_cols())?;
    let mut rng = SeededRng::new(config.seed, INIT_STREAM);
    let (mut w, mut h) = init_factors(x.n_rows(), x.n_cols(), config.rank, &mut rng)?;

    let mut prev = half_sq_residual(x, &w, &h)?;
    let mut history = Vec::with_capacity(config.max_iters.min(1024));
    let mut converged = false;
    for _ in 0..config.max_iters {
        h = mu_update_h(x, &w, &h, config.mu_epsilon)?;
        w = mu_update_w(x, &w, &h, config.mu_epsilon)?;
        let obj = half_sq_residual(x, &w, &h)?;
        history.push(obj);
        if obj == 0.0 || (obj - prev).abs() / prev.max(1e-12) < config.rel_tol {
            converged = true;
            break;
        }
        prev = obj;
    }
    if !w.is_finite() || !h.is_finite() {
        return Err(Error::Numerical("non-finite factor after updates".into()));
    }
    Ok(Factorization {
        w,
        h,
        iterations_run: history.len(),
        objective_history: history,
        converged,
        seed: config.seed,
        rank: config.rank,
    })
}
