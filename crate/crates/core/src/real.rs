//! Scalar abstraction for the geometric core.
//!
//! Everything that measures lengths is generic over the float width;
//! concrete `F64`/`F32` aliases live at the crate root. The exact
//! integer arithmetic in [`crate::combinatorics`] is deliberately not
//! generic: it must never round.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar (`f32` or `f64`) for the geometric estimators.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Convert an `f64` literal (tolerances, step sizes) into the scalar type.
#[inline]
pub fn r64<R: Real>(x: f64) -> R {
    R::from_f64(x).expect("f64 literal must be representable in the scalar type")
}

/// Convert a small integer into the scalar type.
#[inline]
pub fn rint<R: Real>(n: u64) -> R {
    R::from_u64(n).expect("integer must be representable in the scalar type")
}
