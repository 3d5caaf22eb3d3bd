//! Scalar abstraction for probabilities and utilities.
//!
//! The inference and decision layers are written against [`Prob`] so the same
//! code runs in `f64` (the default everywhere else in the crate) or `f32`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable as a probability or utility.
pub trait Prob:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Slack allowed when checking that a distribution sums to one.
    fn norm_tolerance() -> Self;

    /// Lossy conversion from an `f64` literal or config value.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to every Prob type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Prob converts to f64")
    }
}

impl Prob for f64 {
    fn norm_tolerance() -> Self {
        1e-9
    }
}

impl Prob for f32 {
    fn norm_tolerance() -> Self {
        1e-5
    }
}

/// Sum a slice in index order (keeps results bitwise reproducible).
pub(crate) fn sum<S: Prob>(values: &[S]) -> S {
    values.iter().fold(S::zero(), |acc, &v| acc + v)
}
