use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Fraction of assigned (leaf) rows whose leaf's modal label is their own.
    pub accuracy_assigned: f64,
    /// Same count over assigned plus residual rows.
    pub accuracy_total: f64,
    pub n_assigned: usize,
    pub n_residual: usize,
    pub leaf_to_label: BTreeMap<String, String>,
    /// Rows follow `confusion_leaves`, columns `confusion_labels`.
    pub confusion: Vec<Vec<usize>>,
    pub confusion_leaves: Vec<String>,
    pub confusion_labels: Vec<String>,
    pub warnings: Vec<String>,
}

/// Modal-label accuracy of a partition against ground-truth labels.
///
/// Each leaf takes the most frequent true label among its members (ties go
/// to the lexicographically smallest label).
pub fn label_match_accuracy<S: AsRef<str>>(
    leaves: &[(String, Vec<usize>)],
    residuals: &[usize],
    true_labels: &[S],
) -> Result<AccuracyReport> {
    let n = true_labels.len();
    let mut seen = vec![false; n];
    for &i in leaves.iter().flat_map(|(_, m)| m).chain(residuals) {
        if i >= n {
            return Err(Error::Validation(format!("row {i} has no label ({n} labels)")));
        }
        if seen[i] {
            return Err(Error::Validation(format!("row {i} appears in more than one group")));
        }
        seen[i] = true;
    }

    let labels: BTreeSet<&str> = true_labels.iter().map(AsRef::as_ref).collect();
    let label_pos: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut warnings = Vec::new();
    let mut leaf_to_label = BTreeMap::new();
    let mut confusion = Vec::new();
    let mut confusion_leaves = Vec::new();
    let mut correct = 0usize;
    let mut n_assigned = 0usize;
    for (id, members) in leaves {
        if members.is_empty() {
            warnings.push(format!("leaf {id} is empty and was excluded"));
            continue;
        }
        let mut counts = vec![0usize; labels.len()];
        for &i in members {
            counts[label_pos[true_labels[i].as_ref()]] += 1;
        }
        // first maximum in sorted label order
        let (best, &hits) = counts
            .iter()
            .enumerate()
            .fold((0, &0), |acc, (i, c)| if *c > *acc.1 { (i, c) } else { acc });
        let modal = *labels.iter().nth(best).expect("label index in range");
        leaf_to_label.insert(id.clone(), modal.to_string());
        correct += hits;
        n_assigned += members.len();
        confusion.push(counts);
        confusion_leaves.push(id.clone());
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(AccuracyReport {
        accuracy_assigned: ratio(correct, n_assigned),
        accuracy_total: ratio(correct, n_assigned + residuals.len()),
        n_assigned,
        n_residual: residuals.len(),
        leaf_to_label,
        confusion,
        confusion_leaves,
        confusion_labels: labels.into_iter().map(str::to_string).collect(),
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over √n; 0 for a single value.
    pub std_error: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary {
            n,
            mean: f64::NAN,
            std_error: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std_error = if n < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    Summary { n, mean, std_error }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Vec<&'static str> {
        vec!["a", "a", "b", "b", "c", "c"]
    }

    #[test]
    fn exact_partition_scores_one() {
        let leaves = vec![
            ("x".to_string(), vec![0, 1]),
            ("y".to_string(), vec![2, 3]),
            ("z".to_string(), vec![4, 5]),
        ];
        let r = label_match_accuracy(&leaves, &[], &labels()).unwrap();
        assert_eq!(r.accuracy_assigned, 1.0);
        assert_eq!(r.accuracy_total, 1.0);
        assert_eq!(r.leaf_to_label["y"], "b");
    }

    #[test]
    fn merged_groups_count_half() {
        // leaf {a,a,b,b} → modal "a" (tie → smaller), 2 of 4 correct; leaf {c,c} correct
        let leaves = vec![
            ("m".to_string(), vec![0, 1, 2, 3]),
            ("c".to_string(), vec![4, 5]),
        ];
        let r = label_match_accuracy(&leaves, &[], &labels()).unwrap();
        assert_eq!(r.leaf_to_label["m"], "a");
        assert!((r.accuracy_assigned - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(r.confusion[0], vec![2, 2, 0]);
    }

    #[test]
    fn residuals_only_hit_total() {
        let leaves = vec![("x".to_string(), vec![0, 1]), ("y".to_string(), vec![2, 3])];
        let r = label_match_accuracy(&leaves, &[4, 5], &labels()).unwrap();
        assert_eq!(r.accuracy_assigned, 1.0);
        assert!((r.accuracy_total - 4.0 / 6.0).abs() < 1e-15);
        assert!(r.accuracy_total <= r.accuracy_assigned);
    }

    #[test]
    fn empty_leaf_warns() {
        let leaves = vec![("e".to_string(), vec![]), ("x".to_string(), vec![0, 1])];
        let r = label_match_accuracy(&leaves, &[], &labels()).unwrap();
        assert_eq!(r.warnings.len(), 1);
        assert!(!r.leaf_to_label.contains_key("e"));
    }

    #[test]
    fn overlapping_leaves_rejected() {
        let leaves = vec![("x".to_string(), vec![0, 1]), ("y".to_string(), vec![1])];
        assert!(label_match_accuracy(&leaves, &[], &labels()).is_err());
        assert!(label_match_accuracy(&[("x".to_string(), vec![9])], &[], &labels()).is_err());
    }

    #[test]
    fn summary_single_value() {
        let s = summarize(&[0.9]);
        assert_eq!(s.mean, 0.9);
        assert_eq!(s.std_error, 0.0);
        let s = summarize(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std_error - 1.0).abs() < 1e-15);
    }
}
