use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::ops::dot;
use super::Matrix;

/// Singular values in descending order, by one-sided Jacobi rotations.
///
/// Accurate to roughly machine epsilon times the largest singular value,
/// which is what rank tests against a relative threshold need.
pub fn singular_values<T: Scalar>(a: &Matrix<T>) -> Vec<f64> {
    // Rotate the columns of the taller orientation; store them as rows.
    let (n, m) = a.shape();
    let mut cols: Vec<Vec<f64>> = if n >= m {
        (0..m).map(|j| a.col(j).iter().map(|v| v.widen()).collect()).collect()
    } else {
        (0..n).map(|i| a.row(i).iter().map(|v| v.widen()).collect()).collect()
    };
    let p = cols.len();
    let tol = 1e-15;
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..p {
            for j in (i + 1)..p {
                let alpha: f64 = cols[i].iter().map(|v| v * v).sum();
                let beta: f64 = cols[j].iter().map(|v| v * v).sum();
                let gamma = dot(&cols[i], &cols[j]);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(j);
                for (x, y) in left[i].iter_mut().zip(right[0].iter_mut()) {
                    let (xi, yj) = (*x, *y);
                    *x = c * xi - s * yj;
                    *y = s * xi + c * yj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Least-squares solution of `A x ≈ b` by Householder QR (`A` is n×p, n ≥ p).
///
/// Fails when `R` has a diagonal entry below `rank_tol` times the largest.
pub fn lstsq_qr(a: &Matrix<f64>, b: &[f64], rank_tol: f64) -> Result<Vec<f64>> {
    let (n, p) = a.shape();
    if b.len() != n {
        return Err(Error::shape("lstsq_qr", format!("A is {n}x{p}, b has {}", b.len())));
    }
    if n < p {
        return Err(Error::shape("lstsq_qr", format!("underdetermined {n}x{p} system")));
    }
    let mut cols: Vec<Vec<f64>> = (0..p).map(|j| a.col(j)).collect();
    let mut rhs = b.to_vec();
    let mut diag = vec![0.0f64; p];
    for j in 0..p {
        let norm = cols[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            diag[j] = 0.0;
            continue;
        }
        let alpha = if cols[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = cols[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for col in cols.iter_mut().skip(j) {
                let proj = 2.0 * dot(&v, &col[j..]) / vnorm2;
                for (c, vi) in col[j..].iter_mut().zip(&v) {
                    *c -= proj * vi;
                }
            }
            let proj = 2.0 * dot(&v, &rhs[j..]) / vnorm2;
            for (r, vi) in rhs[j..].iter_mut().zip(&v) {
                *r -= proj * vi;
            }
        }
        diag[j] = cols[j][j];
    }
    let dmax = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if p > 0 && (dmax == 0.0 || diag.iter().any(|d| d.abs() <= rank_tol * dmax)) {
        return Err(Error::Numerical("least-squares system is rank deficient".into()));
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = ((i + 1)..p).map(|k| cols[k][i] * x[k]).sum();
        x[i] = (rhs[i] - s) / cols[i][i];
    }
    Ok(x)
}
