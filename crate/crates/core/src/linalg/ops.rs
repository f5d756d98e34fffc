use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Matrix;

/// `A B`.
pub fn matmul<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.n_cols() != b.n_rows() {
        return Err(Error::shape(
            "matmul",
            format!("{:?} x {:?}", a.shape(), b.shape()),
        ));
    }
    let (n, p, m) = (a.n_rows(), a.n_cols(), b.n_cols());
    let mut acc = vec![0.0f64; n * m];
    for i in 0..n {
        let out = &mut acc[i * m..(i + 1) * m];
        for (l, &ail) in a.row(i).iter().enumerate().take(p) {
            let ail = ail.widen();
            if ail == 0.0 {
                continue;
            }
            for (o, &blj) in out.iter_mut().zip(b.row(l)) {
                *o += ail * blj.widen();
            }
        }
    }
    Ok(Matrix::from_f64_acc(n, m, acc))
}

/// `Aᵀ B` without materializing the transpose.
pub fn matmul_tn<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.n_rows() != b.n_rows() {
        return Err(Error::shape(
            "matmul_tn",
            format!("{:?}ᵀ x {:?}", a.shape(), b.shape()),
        ));
    }
    let (k, m) = (a.n_cols(), b.n_cols());
    let mut acc = vec![0.0f64; k * m];
    for l in 0..a.n_rows() {
        let brow = b.row(l);
        for (r, &alr) in a.row(l).iter().enumerate() {
            let alr = alr.widen();
            if alr == 0.0 {
                continue;
            }
            for (o, &blj) in acc[r * m..(r + 1) * m].iter_mut().zip(brow) {
                *o += alr * blj.widen();
            }
        }
    }
    Ok(Matrix::from_f64_acc(k, m, acc))
}

/// `A Bᵀ` without materializing the transpose.
pub fn matmul_nt<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.n_cols() != b.n_cols() {
        return Err(Error::shape(
            "matmul_nt",
            format!("{:?} x {:?}ᵀ", a.shape(), b.shape()),
        ));
    }
    let (n, k) = (a.n_rows(), b.n_rows());
    let mut acc = vec![0.0f64; n * k];
    for i in 0..n {
        let arow = a.row(i);
        for r in 0..k {
            acc[i * k + r] = dot(arow, b.row(r));
        }
    }
    Ok(Matrix::from_f64_acc(n, k, acc))
}

#[inline]
pub fn dot<T: Scalar>(u: &[T], v: &[T]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a.widen() * b.widen()).sum()
}

pub fn norm2<T: Scalar>(u: &[T]) -> f64 {
    dot(u, u).sqrt()
}

pub fn frobenius_norm<T: Scalar>(a: &Matrix<T>) -> T {
    T::narrow(a.sum_sq().sqrt())
}

/// `½‖X − WH‖²_F`, evaluated from the explicit residual.
pub fn half_sq_residual<T: Scalar>(x: &Matrix<T>, w: &Matrix<T>, h: &Matrix<T>) -> Result<f64> {
    if w.n_rows() != x.n_rows() || h.n_cols() != x.n_cols() || w.n_cols() != h.n_rows() {
        return Err(Error::shape(
            "half_sq_residual",
            format!("X {:?}, W {:?}, H {:?}", x.shape(), w.shape(), h.shape()),
        ));
    }
    let m = x.n_cols();
    let k = w.n_cols();
    let mut total = 0.0f64;
    let mut row = vec![0.0f64; m];
    for i in 0..x.n_rows() {
        row.iter_mut().for_each(|v| *v = 0.0);
        let wrow = w.row(i);
        for r in 0..k {
            let wr = wrow[r].widen();
            if wr == 0.0 {
                continue;
            }
            for (o, &hv) in row.iter_mut().zip(h.row(r)) {
                *o += wr * hv.widen();
            }
        }
        for (&xv, &p) in x.row(i).iter().zip(&row) {
            let d = xv.widen() - p;
            total += d * d;
        }
    }
    Ok(0.5 * total)
}

/// Result of a cosine similarity; `degenerate` marks a zero-norm operand,
/// in which case `value` is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cosine<T> {
    pub value: T,
    pub degenerate: bool,
}

pub fn cosine_similarity<T: Scalar>(u: &[T], v: &[T]) -> Result<Cosine<T>> {
    if u.len() != v.len() {
        return Err(Error::shape(
            "cosine_similarity",
            format!("lengths {} and {}", u.len(), v.len()),
        ));
    }
    let nu = norm2(u);
    let nv = norm2(v);
    if nu == 0.0 || nv == 0.0 {
        log::warn!("cosine similarity with a zero vector; reporting 0");
        return Ok(Cosine {
            value: T::zero(),
            degenerate: true,
        });
    }
    let c = (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0);
    Ok(Cosine {
        value: T::narrow(c),
        degenerate: false,
    })
}
