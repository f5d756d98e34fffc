//! Dense matrices, products, norms, decompositions and seeded random streams.

mod decomp;
pub mod io;
mod matrix;
mod ops;
mod rng;

pub use decomp::{lstsq_qr, singular_values};
pub use matrix::Matrix;
pub use ops::{
    cosine_similarity, dot, frobenius_norm, half_sq_residual, matmul, matmul_nt, matmul_tn, norm2,
    Cosine,
};
pub use rng::{derive_seed, SeededRng};
