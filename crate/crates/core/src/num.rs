//! Scalar abstraction for the metric code.

use std::fmt::Debug;

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point types the metrics can be evaluated in.
pub trait Scalar: RealField + Copy + FromPrimitive + ToPrimitive + Debug + Send + Sync {
    /// Tolerance for structural checks (symmetry, negative eigenvalues).
    fn structural_tol() -> Self;
}

impl Scalar for f32 {
    fn structural_tol() -> Self {
        64.0 * f32::EPSILON
    }
}

impl Scalar for f64 {
    fn structural_tol() -> Self {
        1e-9
    }
}

/// Converts an `f64` constant into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    nalgebra::convert(x)
}

#[inline]
pub fn from_usize<T: Scalar>(n: usize) -> T {
    lit(n as f64)
}
