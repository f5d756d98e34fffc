use std::collections::BTreeMap;

use phnmf::eval::{
    coeff_alignment, label_match_accuracy, ols, ridge, ridge_cv, summarize, CvConfig,
};
use phnmf::linalg::{Matrix, SeededRng};
use proptest::prelude::*;

fn design(n: usize, p: usize, seed: u64) -> Matrix<f64> {
    let mut rng = SeededRng::new(seed, 5);
    Matrix::from_fn(n, p, |_, _| 4.0 * rng.uniform() - 1.0)
}

fn exact_response(x: &Matrix<f64>, theta: &[f64], b: f64) -> Vec<f64> {
    x.rows_iter()
        .map(|r| r.iter().zip(theta).map(|(a, t)| a * t).sum::<f64>() + b)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn accuracy_ignores_label_names_and_leaf_order(
        assign in prop::collection::vec(0usize..4, 1..40),
        truth in prop::collection::vec(0usize..3, 40),
        shift in 0usize..3,
    ) {
        let n = assign.len();
        let truth = &truth[..n];
        let names = ["red", "green", "blue"];
        let labels: Vec<&str> = truth.iter().map(|&t| names[t]).collect();
        // bijection chosen so it does not preserve lexicographic order
        let renamed: Vec<String> = truth.iter().map(|&t| format!("g{}", (t + shift) % 3)).collect();
        let mut leaves: Vec<(String, Vec<usize>)> = (0..4)
            .map(|l| (format!("leaf{l}"), (0..n).filter(|&i| assign[i] == l).collect()))
            .filter(|(_, m): &(String, Vec<usize>)| !m.is_empty())
            .collect();
        let base = label_match_accuracy(&leaves, &[], &labels).unwrap();
        leaves.reverse();
        for (i, leaf) in leaves.iter_mut().enumerate() {
            leaf.0 = format!("x{i}");
        }
        let permuted = label_match_accuracy(&leaves, &[], &labels).unwrap();
        let relabeled = label_match_accuracy(&leaves, &[], &renamed).unwrap();
        prop_assert_eq!(base.accuracy_assigned, permuted.accuracy_assigned);
        // ties between modal labels can resolve differently after renaming,
        // but a tie never changes the count of correct rows
        prop_assert_eq!(base.accuracy_assigned, relabeled.accuracy_assigned);
        prop_assert!(base.accuracy_total <= base.accuracy_assigned);
    }

    #[test]
    fn ridge_zero_matches_ols(n in 6usize..30, p in 1usize..4, seed in any::<u64>()) {
        let x = design(n, p, seed);
        let mut rng = SeededRng::new(seed, 6);
        let y: Vec<f64> = (0..n).map(|_| rng.uniform() * 10.0).collect();
        let a = ols(&x, &y).unwrap();
        let b = ridge(&x, &y, 0.0).unwrap();
        for (u, v) in a.coefficients.iter().zip(&b.coefficients) {
            prop_assert!((u - v).abs() < 1e-8);
        }
        prop_assert!((a.intercept - b.intercept).abs() < 1e-8);
    }

    #[test]
    fn ols_recovers_exact_coefficients(n in 5usize..40, seed in any::<u64>()) {
        let theta = [1.5, -2.0, 0.25];
        let x = design(n, 3, seed);
        let y = exact_response(&x, &theta, 0.7);
        let fit = ols(&x, &y).unwrap();
        for (c, t) in fit.coefficients.iter().zip(theta) {
            prop_assert!((c - t).abs() < 1e-8);
        }
        prop_assert!((fit.intercept - 0.7).abs() < 1e-8);
    }
}

#[test]
fn merged_groups_count_by_hand() {
    let labels = ["a", "a", "a", "a", "b", "b", "b", "b"];
    let leaves = vec![
        ("x".to_string(), vec![0, 1, 4, 5]),
        ("y".to_string(), vec![2, 3]),
        ("z".to_string(), vec![6]),
    ];
    let r = label_match_accuracy(&leaves, &[7], &labels).unwrap();
    // x: tie -> "a", 2 correct; y: 2 correct; z: 1 correct
    assert_eq!(r.n_assigned, 7);
    assert!((r.accuracy_assigned - 5.0 / 7.0).abs() < 1e-15);
    assert!((r.accuracy_total - 5.0 / 8.0).abs() < 1e-15);
    assert_eq!(r.leaf_to_label["x"], "a");
}

#[test]
fn scalar_ridge_matches_centered_closed_form() {
    let x = Matrix::column(&[1.0, 2.0]).unwrap();
    let y = [1.0, 2.0];
    let fit = ridge(&x, &y, 1.0).unwrap();
    // centered: x = (-0.5, 0.5), y = (-0.5, 0.5); Σxy / (Σx² + λ) = 0.5 / 1.5
    let sxy: f64 = [-0.5f64, 0.5].iter().map(|v| v * v).sum();
    let expected = sxy / (sxy + 1.0);
    assert!((fit.coefficients[0] - expected).abs() < 1e-12);
    assert!((fit.intercept - (1.5 - expected * 1.5)).abs() < 1e-12);
}

#[test]
fn heavy_ridge_shrinks_to_the_mean() {
    let x = design(20, 3, 1);
    let y = exact_response(&x, &[1.0, 2.0, 3.0], 5.0);
    let fit = ridge(&x, &y, 1e8).unwrap();
    assert!(fit.coefficients.iter().all(|c| c.abs() < 1e-5));
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    assert!((fit.intercept - mean).abs() < 1e-3);
}

#[test]
fn cv_on_noiseless_data_picks_smallest_lambda() {
    let x = design(60, 4, 2);
    let y = exact_response(&x, &[0.5, 1.0, 1.5, 2.0], 0.0);
    let cv = CvConfig { seed: 3, ..CvConfig::default() };
    let fit = ridge_cv(&x, &y, &cv).unwrap();
    assert_eq!(fit.lambda, 1e-4);
    // the oracle: held-out error grows with λ on exact data
    for pair in fit.cv_mse_table.windows(2) {
        assert!(pair[0].1 <= pair[1].1);
    }
    let again = ridge_cv(&x, &y, &cv).unwrap();
    assert_eq!(fit, again);
}

#[test]
fn cv_rejects_too_few_rows() {
    let x = design(3, 1, 4);
    assert!(ridge_cv(&x, &[1.0, 2.0, 3.0], &CvConfig::default()).unwrap_err().is_validation());
}

#[test]
fn ols_rejects_collinear_columns() {
    let x = Matrix::from_fn(10, 2, |i, _| i as f64);
    let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let err = ols(&x, &y).unwrap_err();
    assert!(err.to_string().contains("ridge"), "{err}");
}

#[test]
fn alignment_against_truth() {
    let x = design(30, 2, 5);
    let theta = vec![1.0, 2.0];
    let sub = ols(&x, &exact_response(&x, &theta, 0.0)).unwrap();
    let pop = ols(&x, &exact_response(&x, &[2.0, -1.0], 0.0)).unwrap();
    let subs = BTreeMap::from([("g".to_string(), sub.clone())]);
    let truth = BTreeMap::from([("g".to_string(), theta)]);
    let rows = coeff_alignment(&subs, &pop, Some(&truth)).unwrap();
    assert!((rows[0].subgroup_vs_truth.unwrap() - 1.0).abs() < 1e-10);
    assert!(rows[0].population_vs_truth.unwrap().abs() < 1e-8);
    let same = coeff_alignment(&subs, &sub, None).unwrap();
    assert!((same[0].subgroup_vs_population - 1.0).abs() < 1e-12);
    assert!(same[0].subgroup_vs_truth.is_none());
}

#[test]
fn summary_of_one_has_zero_error() {
    let s = summarize(&[0.9]);
    assert_eq!((s.n, s.mean, s.std_error), (1, 0.9, 0.0));
    let s = summarize(&[1.0, 3.0]);
    assert!((s.std_error - 1.0).abs() < 1e-15);
}
