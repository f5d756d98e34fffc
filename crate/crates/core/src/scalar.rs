//! Scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar usable as a matrix entry.
///
/// Kernels accumulate in `f64` regardless of the storage type, so `widen` and
/// `narrow` are the only conversions on the hot path.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossless (for `f32`) or identity (for `f64`) conversion to `f64`.
    fn widen(self) -> f64;
    /// Round an `f64` accumulator back to storage precision.
    fn narrow(v: f64) -> Self;
    /// Short name used in exported metadata.
    const NAME: &'static str;
}

impl Scalar for f64 {
    #[inline(always)]
    fn widen(self) -> f64 {
        self
    }
    #[inline(always)]
    fn narrow(v: f64) -> Self {
        v
    }
    const NAME: &'static str = "f64";
}

impl Scalar for f32 {
    #[inline(always)]
    fn widen(self) -> f64 {
        self as f64
    }
    #[inline(always)]
    fn narrow(v: f64) -> Self {
        v as f32
    }
    const NAME: &'static str = "f32";
}
