use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar used by every geometric routine in the crate.
///
/// Implemented for `f32` and `f64`. Storage formats (PLY) are fixed-width
/// regardless of the scalar; conversions go through [`Real::from_f64`] and
/// [`Real::to_f64`].
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64` (rounds to nearest for `f32`).
    fn from_f64_lossy(v: f64) -> Self;

    fn to_f64_lossless(self) -> f64;

    fn from_usize_exact(v: usize) -> Self {
        Self::from_f64_lossy(v as f64)
    }

    fn lit(v: f64) -> Self {
        Self::from_f64_lossy(v)
    }
}

impl Real for f32 {
    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self
    }
}
