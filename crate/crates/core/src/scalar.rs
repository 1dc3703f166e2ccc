//! Floating point abstraction shared by every probability-bearing type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used for probabilities, log-probabilities and model weights.
///
/// Implemented for [`f32`] and [`f64`]. The crate root exposes `f64` aliases
/// for the common case.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Allowed deviation of a probability vector's total from 1.
    fn simplex_tolerance() -> Self;

    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 is representable")
    }

    fn of_count(value: u64) -> Self {
        Self::from_u64(value).expect("count is representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn simplex_tolerance() -> Self {
        1e-5
    }
}

impl Scalar for f64 {
    fn simplex_tolerance() -> Self {
        1e-9
    }
}
