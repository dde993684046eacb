//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All probability, value and expectation arithmetic is written against
//! [`Scalar`], so the engine runs in `f64` (the default used by the
//! simulation layer) or in `f32` for quick, low-precision sweeps.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable by the distribution engine and the solvers.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Probability mass below this value is dropped from distribution tails.
    const NEGLIGIBLE_MASS: Self;
    /// Absolute tolerance used when validating probability vectors.
    const PROB_TOL: Self;

    /// Converts an `f64` literal; panics only for non-representable input,
    /// which cannot happen for the finite constants used in this crate.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits in scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    // epsilon^2: far below anything a comparison in this crate can resolve.
    const NEGLIGIBLE_MASS: f64 = f64::EPSILON * f64::EPSILON;
    const PROB_TOL: f64 = 1e-12;
}

impl Scalar for f32 {
    const NEGLIGIBLE_MASS: f32 = f32::EPSILON * f32::EPSILON;
    const PROB_TOL: f32 = 1e-5;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        assert_eq!(<f64 as Scalar>::lit(0.25), 0.25);
        assert_eq!(<f32 as Scalar>::lit(0.25), 0.25f32);
        assert_eq!(<f64 as Scalar>::from_count(7), 7.0);
    }
}
