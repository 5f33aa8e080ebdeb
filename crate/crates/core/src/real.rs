//! Scalar abstraction: every algorithm is generic over `F: Real`.

use std::fmt::{Debug, Display, LowerExp};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar for all numerical routines (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lift an `f64` literal into `Self`.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    /// Lossy conversion to `f64` (exact for `f64` itself).
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite value")
    }

    /// 2π.
    #[inline]
    fn tau() -> Self {
        Self::PI() + Self::PI()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Euclidean norm of a slice.
pub fn norm2<F: Real>(v: &[F]) -> F {
    v.iter().fold(F::zero(), |acc, &x| acc + x * x).sqrt()
}

/// Max-norm of a slice.
pub fn norm_inf<F: Real>(v: &[F]) -> F {
    v.iter().fold(F::zero(), |acc, &x| acc.max(x.abs()))
}

/// Dot product of two slices of equal length.
pub fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}
