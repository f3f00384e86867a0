//! Scalar abstraction for the numeric engine.
//!
//! Everything in [`crate::nn`], [`crate::osbp`] and [`crate::baselines`] is generic over
//! [`Scalar`], which is implemented for `f32` and `f64`. Gradient checks are only
//! meaningful at `f64`; `f32` is supported for cheaper inference and training.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub trait Scalar:
    Float + NumAssign + FromPrimitive + ToPrimitive + Default + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Converts an `f64` constant. Panics only for values the type cannot represent at all,
    /// which never happens for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize converts to float")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
