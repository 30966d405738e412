//! Scalar abstraction for the analytic layer.
//!
//! Closed-form curves, rate functions and entropies are generic over the
//! floating-point type; simulation kernels and exact-rational oracles are
//! concrete (`u64` words and `BigRational`). Concrete aliases live at the
//! crate root.

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real: Float + FromPrimitive + core::fmt::Debug + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into the working scalar type.
#[inline]
pub(crate) fn lit<R: Real>(v: f64) -> R {
    R::from_f64(v).expect("f64 literal representable in scalar type")
}
