use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Assignment threshold on `W` coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Alpha {
    /// The same threshold for every column.
    Absolute(f64),
    /// Fraction of the largest entry of the column being tested.
    Relative(f64),
}

impl Default for Alpha {
    fn default() -> Self {
        Alpha::Relative(0.05)
    }
}

impl Alpha {
    /// Per-column thresholds for a concrete `W`.
    pub fn thresholds<T: Scalar>(&self, w: &Matrix<T>) -> Vec<T> {
        match *self {
            Alpha::Absolute(a) => vec![T::narrow(a); w.n_cols()],
            Alpha::Relative(f) => (0..w.n_cols())
                .map(|j| {
                    let max = w.col(j).into_iter().fold(T::zero(), T::max);
                    T::narrow(f * max.widen())
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardAssignment {
    /// Column index (0-based) per row, `None` for residual rows.
    pub assignments: Vec<Option<usize>>,
    pub residuals: Vec<usize>,
}

impl HardAssignment {
    /// Row indices per group, groups in column order.
    pub fn groups(&self, k: usize) -> Vec<Vec<usize>> {
        let mut g = vec![Vec::new(); k];
        for (row, a) in self.assignments.iter().enumerate() {
            if let Some(j) = a {
                g[*j].push(row);
            }
        }
        g
    }
}

/// Each row goes to its argmax column if that coefficient exceeds `alpha`.
/// Ties go to the smallest column index.
pub fn assign_hard<T: Scalar>(w: &Matrix<T>, alpha: T) -> HardAssignment {
    assign_hard_with(w, &vec![alpha; w.n_cols()])
}

/// [`assign_hard`] with a threshold per column.
pub fn assign_hard_with<T: Scalar>(w: &Matrix<T>, thresholds: &[T]) -> HardAssignment {
    let mut assignments = Vec::with_capacity(w.n_rows());
    let mut residuals = Vec::new();
    for (l, row) in w.rows_iter().enumerate() {
        let mut best = 0;
        for (j, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = j;
            }
        }
        if !row.is_empty() && row[best] > thresholds[best] {
            assignments.push(Some(best));
        } else {
            assignments.push(None);
            residuals.push(l);
        }
    }
    HardAssignment {
        assignments,
        residuals,
    }
}

/// Each row joins every column whose coefficient exceeds `alpha`.
pub fn assign_soft<T: Scalar>(w: &Matrix<T>, alpha: T) -> Vec<Vec<usize>> {
    assign_soft_with(w, &vec![alpha; w.n_cols()])
}

pub fn assign_soft_with<T: Scalar>(w: &Matrix<T>, thresholds: &[T]) -> Vec<Vec<usize>> {
    w.rows_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(j, &v)| v > thresholds[*j])
                .map(|(j, _)| j)
                .collect()
        })
        .collect()
}
