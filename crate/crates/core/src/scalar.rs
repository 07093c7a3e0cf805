//! Scalar abstraction shared by the analytic parts of the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type usable by the generic modules: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in target float")
}

#[inline]
pub(crate) fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Real error function, evaluated in double precision.
#[inline]
pub(crate) fn erf<T: Real>(x: T) -> T {
    lit(libm::erf(to_f64(x)))
}

/// Complementary error function, evaluated in double precision.
#[inline]
pub(crate) fn erfc<T: Real>(x: T) -> T {
    lit(libm::erfc(to_f64(x)))
}

/// Standard normal cumulative distribution.
#[inline]
pub(crate) fn normal_cdf<T: Real>(z: T) -> T {
    lit::<T>(0.5) * erfc(-z / T::SQRT_2())
}
