//! Scalar abstraction for the numeric core.
//!
//! Everything numeric in this crate is generic over [`Real`], which is a
//! blanket trait over `f32`/`f64` (anything float-like from `num-traits`).
//! Randomness is always drawn in `f64` and converted, so a fixed seed
//! produces the same draw sequence regardless of the scalar type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar used throughout the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum<Self>
    + for<'a> Sum<&'a Self>
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64` (used for constants and RNG draws).
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 conversion")
    }

    /// Conversion to `f64` (used for metrics and CSV output).
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("f64 conversion")
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + Sum<T>
        + for<'a> Sum<&'a T>
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_generic<T: Real>(xs: &[T]) -> T {
        xs.iter().sum()
    }

    #[test]
    fn works_for_both_float_widths() {
        assert_eq!(sum_generic(&[1.0f32, 2.0]), 3.0f32);
        assert_eq!(sum_generic(&[1.0f64, 2.0]), 3.0f64);
        assert_eq!(f32::from_f64_lossy(0.5), 0.5f32);
        assert_eq!(1.5f64.to_f64_lossy(), 1.5);
    }
}
