//! Floating-point abstraction so the numeric core runs at f32 or f64.

use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Scalar type the model, trainer and metrics are generic over.
///
/// Implemented for `f32` and `f64`. All literals in the crate go through
/// [`Scalar::of`] so a single code path serves both precisions.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the target type cannot
    /// represent any finite approximation, which neither f32 nor f64 hits.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 convertible to scalar")
    }

    /// Widens to f64 for reporting and serialization.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
