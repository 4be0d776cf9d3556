//! Scalar abstraction: all numeric code in this crate is generic over `Real`,
//! instantiated as `f32` (training default) or `f64` (gradient checks, metrics).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point scalar usable throughout the crate.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssignOps + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` constant.
    fn from_f64_c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }

    /// Conversion to `f64` for reporting and mixed-precision paths.
    fn to_f64_c(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for `S::from_f64_c` used heavily in numeric code.
#[inline]
pub fn real<S: Real>(x: f64) -> S {
    S::from_f64_c(x)
}
