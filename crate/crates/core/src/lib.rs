//! Population-based hierarchical non-negative matrix factorization.
//!
//! The numeric core ([`linalg`], [`nmf`], [`model_select`], [`hierarchy`]) is
//! generic over [`Scalar`]; the aliases below fix the storage type. Data
//! generation, evaluation and ingestion work in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod hierarchy;
pub mod ingest;
pub mod linalg;
pub mod model_select;
pub mod nmf;
mod scalar;
pub mod synthgen;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type Factorization = nmf::Factorization<f64>;
pub type Factorization32 = nmf::Factorization<f32>;
pub type NmfConfig = nmf::NmfConfig;
pub type PopulationTree = hierarchy::PopulationTree<f64>;
pub type TopicTree = hierarchy::TopicTree<f64>;
pub type SimilarityReport = model_select::SimilarityReport<f64>;
