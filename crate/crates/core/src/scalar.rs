//! Numeric abstractions.
//!
//! Two tiers are used across the crate:
//!
//! * [`Coefficient`] is any ordered numeric field the allocation solver and
//!   the integer-program tooling can work in. It is implemented for `f32`,
//!   `f64` and exact rationals, so optimality checks can be run without
//!   rounding.
//! * [`Scalar`] adds the floating point operations (`sqrt`, `ceil`, ...)
//!   needed for geometry, routing and accessibility.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::{Ratio, Rational64};
use num_traits::{Float, FromPrimitive, Num, NumAssign, Signed, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Absolute slack used when rounding floating point values to integers.
pub const ROUNDING_SLACK: f64 = 1e-9;

/// An ordered numeric field.
pub trait Coefficient:
    Num + NumAssign + Signed + Copy + PartialOrd + Debug + Display + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Largest integer not above `self`, tolerant to floating point noise.
    fn floor_int(self) -> i64;

    /// Smallest integer not below `self`, tolerant to floating point noise.
    fn ceil_int(self) -> i64;

    fn from_int(value: i64) -> Self {
        Self::from_i64(value).expect("integer representable in coefficient type")
    }

    /// Lossy conversion used to feed reals from the geometric side into the
    /// exact side.
    fn from_real(value: f64) -> Self {
        Self::from_f64(value).expect("finite real representable in coefficient type")
    }

    /// Comparison slack at the magnitude of `self`: zero for exact types.
    fn slack(self) -> Self;

    fn to_real(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

macro_rules! float_coefficient {
    ($t:ty) => {
        impl Coefficient for $t {
            fn floor_int(self) -> i64 {
                (self as f64 + ROUNDING_SLACK).floor() as i64
            }

            fn ceil_int(self) -> i64 {
                (self as f64 - ROUNDING_SLACK).ceil() as i64
            }

            fn slack(self) -> Self {
                (ROUNDING_SLACK as $t) * self.abs().max(1.0)
            }
        }
    };
}

float_coefficient!(f32);
float_coefficient!(f64);

impl Coefficient for Rational64 {
    fn floor_int(self) -> i64 {
        *Ratio::floor(&self).numer()
    }

    fn ceil_int(self) -> i64 {
        *Ratio::ceil(&self).numer()
    }

    fn slack(self) -> Self {
        Rational64::from_integer(0)
    }
}

/// Real-valued scalar for geometry and travel times.
pub trait Scalar: Coefficient + Float + Sum + Serialize + DeserializeOwned + Default {
    /// Literal conversion, e.g. `T::lit(3.5)`.
    fn lit(value: f64) -> Self {
        <Self as Coefficient>::from_real(value)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
