//! Floating point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the library computes with: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
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
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Smallest meaningful absolute tolerance for iterative solves at this precision.
    #[inline]
    fn tol_floor() -> Self {
        Self::epsilon() * Self::of(64.0)
    }

    /// Number of binary digits in the mantissa.
    #[inline]
    fn mantissa_bits() -> u32 {
        (-Self::epsilon().log2()).ceil().to_u32().unwrap_or(53) + 1
    }

    #[inline]
    fn two_pi() -> Self {
        Self::TAU()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `max(requested, tol_floor)`: tolerances below the working precision are clamped.
pub(crate) fn effective_tol<S: Scalar>(requested: S) -> S {
    requested.max(S::tol_floor())
}

/// Least-squares slope of `ys` against `xs`.
pub(crate) fn least_squares_slope<S: Scalar>(xs: &[S], ys: &[S]) -> S {
    let n = S::of_usize(xs.len());
    let mx = xs.iter().copied().sum::<S>() / n;
    let my = ys.iter().copied().sum::<S>() / n;
    let mut sxy = S::zero();
    let mut sxx = S::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxy = sxy + (x - mx) * (y - my);
        sxx = sxx + (x - mx) * (x - mx);
    }
    sxy / sxx
}
