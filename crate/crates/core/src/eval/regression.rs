use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cosine_similarity, lstsq_qr, singular_values, Matrix, SeededRng};

/// Full-rank test for OLS: smallest singular value must exceed this fraction
/// of the largest.
pub const OLS_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// 0 for OLS.
    pub lambda: f64,
    /// `(λ, mean held-out MSE)` in ascending λ; empty unless cross-validated.
    pub cv_mse_table: Vec<(f64, f64)>,
}

impl RegressionFit {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept
            + row
                .iter()
                .zip(&self.coefficients)
                .map(|(x, c)| x * c)
                .sum::<f64>()
    }
}

struct Centered {
    xc: Matrix<f64>,
    yc: Vec<f64>,
    x_mean: Vec<f64>,
    y_mean: f64,
}

fn center(x: &Matrix<f64>, y: &[f64]) -> Result<Centered> {
    if x.n_rows() != y.len() {
        return Err(Error::shape(
            "regression",
            format!("X has {} rows, y has {}", x.n_rows(), y.len()),
        ));
    }
    if y.is_empty() {
        return Err(Error::Validation("regression needs at least one row".into()));
    }
    let n = y.len() as f64;
    let p = x.n_cols();
    let mut x_mean = vec![0.0; p];
    for row in x.rows_iter() {
        for (m, v) in x_mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= n);
    let y_mean = y.iter().sum::<f64>() / n;
    let xc = Matrix::from_fn(x.n_rows(), p, |i, j| x.get(i, j) - x_mean[j]);
    let yc = y.iter().map(|v| v - y_mean).collect();
    Ok(Centered {
        xc,
        yc,
        x_mean,
        y_mean,
    })
}

fn finish(c: &Centered, coefficients: Vec<f64>, lambda: f64) -> RegressionFit {
    let intercept = c.y_mean
        - c.x_mean
            .iter()
            .zip(&coefficients)
            .map(|(m, b)| m * b)
            .sum::<f64>();
    RegressionFit {
        coefficients,
        intercept,
        lambda,
        cv_mse_table: Vec::new(),
    }
}

/// Ordinary least squares with an intercept.
pub fn ols(x: &Matrix<f64>, y: &[f64]) -> Result<RegressionFit> {
    let c = center(x, y)?;
    let sv = singular_values(&c.xc);
    let largest = sv.first().copied().unwrap_or(0.0);
    let smallest = if x.n_rows() < x.n_cols() + 1 {
        0.0
    } else {
        sv.last().copied().unwrap_or(0.0)
    };
    if x.n_cols() > 0 && (largest == 0.0 || smallest <= OLS_RANK_TOL * largest) {
        return Err(Error::Numerical(format!(
            "design matrix is rank deficient (σ_min/σ_max = {:e}); use ridge",
            if largest == 0.0 { 0.0 } else { smallest / largest }
        )));
    }
    let theta = lstsq_qr(&c.xc, &c.yc, 0.0)?;
    Ok(finish(&c, theta, 0.0))
}

/// Ridge regression; the intercept is unpenalized (fit on centered data).
pub fn ridge(x: &Matrix<f64>, y: &[f64], lambda: f64) -> Result<RegressionFit> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Parameter(format!("ridge λ must be ≥ 0, got {lambda}")));
    }
    let c = center(x, y)?;
    let (n, p) = c.xc.shape();
    // min ‖y − Xθ‖² + λ‖θ‖² as least squares on [X; √λ I], [y; 0]
    let root = lambda.sqrt();
    let aug = Matrix::from_fn(n + p, p, |i, j| {
        if i < n {
            c.xc.get(i, j)
        } else if i - n == j {
            root
        } else {
            0.0
        }
    });
    let mut rhs = c.yc.clone();
    rhs.resize(n + p, 0.0);
    let theta = lstsq_qr(&aug, &rhs, 0.0)?;
    Ok(finish(&c, theta, lambda))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub grid: Vec<f64>,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            grid: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            folds: 5,
            repeats: 3,
            seed: 0,
        }
    }
}

/// Repeated k-fold cross-validation over a λ grid, then a refit on all rows.
///
/// Fold shuffles for repeat `r` come from stream `r` of the configured seed.
/// Ties in mean MSE go to the smaller λ.
pub fn ridge_cv(x: &Matrix<f64>, y: &[f64], cv: &CvConfig) -> Result<RegressionFit> {
    if cv.grid.is_empty() || cv.grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::Parameter("λ grid must be non-empty and ≥ 0".into()));
    }
    if cv.folds < 2 || cv.repeats == 0 {
        return Err(Error::Parameter("need folds ≥ 2 and repeats ≥ 1".into()));
    }
    let n = x.n_rows();
    if n < cv.folds {
        return Err(Error::Validation(format!(
            "{n} rows cannot be split into {} folds",
            cv.folds
        )));
    }
    if y.len() != n {
        return Err(Error::shape("ridge_cv", format!("X has {n} rows, y has {}", y.len())));
    }
    let mut grid = cv.grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut sums = vec![0.0f64; grid.len()];
    let mut count = 0usize;
    for r in 0..cv.repeats {
        let mut order: Vec<usize> = (0..n).collect();
        SeededRng::new(cv.seed, r as u64).shuffle(&mut order);
        for f in 0..cv.folds {
            let (test, train): (Vec<(usize, usize)>, Vec<(usize, usize)>) =
                order.iter().copied().enumerate().partition(|(pos, _)| pos % cv.folds == f);
            let train: Vec<usize> = train.into_iter().map(|(_, i)| i).collect();
            let test: Vec<usize> = test.into_iter().map(|(_, i)| i).collect();
            let xtr = x.select_rows(&train);
            let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            for (s, &lambda) in sums.iter_mut().zip(&grid) {
                let fit = ridge(&xtr, &ytr, lambda)?;
                let mse = test
                    .iter()
                    .map(|&i| (y[i] - fit.predict_row(x.row(i))).powi(2))
                    .sum::<f64>()
                    / test.len() as f64;
                *s += mse;
            }
            count += 1;
        }
    }
    let table: Vec<(f64, f64)> = grid
        .iter()
        .zip(&sums)
        .map(|(&l, &s)| (l, s / count as f64))
        .collect();
    let best = table
        .iter()
        .fold(table[0], |b, &t| if t.1 < b.1 { t } else { b });
    let mut fit = ridge(x, y, best.0)?;
    fit.cv_mse_table = table;
    Ok(fit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRow {
    pub group: String,
    /// cos(θ̂_group, θ_true), when the truth is known.
    pub subgroup_vs_truth: Option<f64>,
    /// cos(θ̂_population, θ_true), when the truth is known.
    pub population_vs_truth: Option<f64>,
    /// cos(θ̂_group, θ̂_population).
    pub subgroup_vs_population: f64,
    pub warnings: Vec<String>,
}

/// Cosine alignment of per-group coefficient vectors (intercepts excluded).
pub fn coeff_alignment(
    sub_fits: &BTreeMap<String, RegressionFit>,
    pop_fit: &RegressionFit,
    thetas_true: Option<&BTreeMap<String, Vec<f64>>>,
) -> Result<Vec<AlignmentRow>> {
    let mut rows = Vec::with_capacity(sub_fits.len());
    for (group, fit) in sub_fits {
        let mut warnings = Vec::new();
        let mut cos = |a: &[f64], b: &[f64], what: &str| -> Result<f64> {
            let c = cosine_similarity(a, b)?;
            if c.degenerate {
                warnings.push(format!("{what}: zero coefficient vector, similarity set to 0"));
            }
            Ok(c.value)
        };
        let subgroup_vs_population = cos(&fit.coefficients, &pop_fit.coefficients, "population")?;
        let (subgroup_vs_truth, population_vs_truth) = match thetas_true.and_then(|t| t.get(group)) {
            Some(truth) => (
                Some(cos(&fit.coefficients, truth, "truth")?),
                Some(cos(&pop_fit.coefficients, truth, "population truth")?),
            ),
            None => (None, None),
        };
        rows.push(AlignmentRow {
            group: group.clone(),
            subgroup_vs_truth,
            population_vs_truth,
            subgroup_vs_population,
            warnings,
        });
    }
    Ok(rows)
}

/// CSV with one row per group: group, subgroup-vs-truth, population-vs-truth,
/// subgroup-vs-population. Unknown truth renders as an empty field.
pub fn alignment_csv(rows: &[AlignmentRow]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    let mut out = String::from("group,subgroup_vs_truth,population_vs_truth,subgroup_vs_population\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.group,
            opt(r.subgroup_vs_truth),
            opt(r.population_vs_truth),
            r.subgroup_vs_population
        ));
    }
    out
}
