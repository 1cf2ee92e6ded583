//! Scalar abstraction shared by every numerical routine in the crate.

use ndarray::NdFloat;
use num_traits::FromPrimitive;

/// Real floating-point scalar the solver can run on (`f32` or `f64`).
pub trait Real: NdFloat + FromPrimitive {
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    /// Lossy widening used for logging and reporting.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// `sqrt(eps)`: tolerance used where a check must hold for both precisions.
    #[inline]
    fn sqrt_eps() -> Self {
        Self::epsilon().sqrt()
    }
}

impl Real for f32 {}
impl Real for f64 {}
