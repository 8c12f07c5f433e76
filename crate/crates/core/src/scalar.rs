//! Scalar abstraction shared by the numerical modules.
//!
//! Every simulation routine is written against [`Real`] so the same code runs
//! in `f64` (the default, and the precision all tolerances are stated for) or
//! in `f32` for cheap exploratory sweeps.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the simulator: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or sample.
    fn lit(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    /// Smallest branch probability still considered physically possible.
    fn degenerate_threshold() -> Self;
}

impl Real for f64 {
    #[inline(always)]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline(always)]
    fn to_f64_lossy(self) -> f64 {
        self
    }

    fn degenerate_threshold() -> Self {
        1e-15
    }
}

impl Real for f32 {
    #[inline(always)]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline(always)]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }

    // 1e-15 is below f32 resolution for probabilities near one.
    fn degenerate_threshold() -> Self {
        1e-12
    }
}

/// Wraps an angle into `[-π, π)`.
#[inline]
pub fn wrap_phase<T: Real>(x: T) -> T {
    let two_pi = T::TAU();
    let mut r = x - two_pi * ((x + T::PI()) / two_pi).floor();
    if r >= T::PI() {
        r = r - two_pi;
    }
    if r < -T::PI() {
        r = r + two_pi;
    }
    r
}

/// Signed shortest angular displacement from `from` to `to`, in `[-π, π)`.
#[inline]
pub fn angular_diff<T: Real>(to: T, from: T) -> T {
    wrap_phase(to - from)
}
