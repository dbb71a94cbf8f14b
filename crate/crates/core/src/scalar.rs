//! Floating-point abstraction shared by the analytic layers.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar usable by the closed-form and quadrature code.
///
/// Implemented for `f32` and `f64`. Constants are written as `f64` literals and
/// converted through [`Scalar::c`].
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Machine epsilon as `f64`, used to pick tolerances.
    fn eps_f64() -> f64 {
        Self::epsilon().to_f64().unwrap_or(f64::EPSILON)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
