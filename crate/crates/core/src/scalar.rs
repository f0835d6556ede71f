//! Scalar abstraction for the closed-form model.
//!
//! Every formula in [`crate::analysis`] is plain real arithmetic, so the
//! model is written once over a [`Scalar`] and instantiated at `f32` or
//! `f64`. The simulator and Monte-Carlo oracle always work in `f64`; use
//! the aliases at the crate root when you just want concrete types.

use std::fmt;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar used by the attempt-rate and throughput formulas.
///
/// Implemented for `f32` and `f64` only. Note that the default solver
/// tolerance (1e-10) is not reachable in `f32`; pass a looser tolerance
/// when solving in single precision.
pub trait Scalar:
    Float + FromPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    fn half() -> Self;
}

impl Scalar for f32 {
    fn half() -> Self {
        0.5
    }
}

impl Scalar for f64 {
    fn half() -> Self {
        0.5
    }
}

/// Converts a window size or stage count into the working scalar.
///
/// Window sizes are at most a few thousand, far inside the exact integer
/// range of both `f32` and `f64`, so the conversion cannot fail.
pub(crate) fn from_count<S: Scalar>(n: u32) -> S {
    S::from_u32(n).expect("count representable in scalar")
}

pub(crate) fn from_f64<S: Scalar>(v: f64) -> S {
    S::from_f64(v).expect("finite f64 representable in scalar")
}

/// Lossy view of a scalar as `f64`, used for error reporting.
pub(crate) fn to_f64<S: Scalar>(v: S) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}
