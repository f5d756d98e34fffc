//! Clustering accuracy against ground truth, regression fits, and
//! coefficient alignment between subgroup and population fits.

mod accuracy;
mod experiment;
mod regression;

pub use accuracy::{label_match_accuracy, summarize, AccuracyReport, Summary};
pub use experiment::{
    accuracy_experiment, accuracy_replicate, regression_replicate, replicate_seed, AccuracyRow,
    ExperimentConfig, RegressionResult,
};
pub use regression::{
    alignment_csv, coeff_alignment, ols, ridge, ridge_cv, AlignmentRow, CvConfig, RegressionFit,
    OLS_RANK_TOL,
};
