//! Floating point abstraction used throughout the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the network model is generic over.
///
/// The associated constants carry the numerical tolerances that depend on the
/// precision of the type, so `f32` instantiations get correspondingly looser
/// checks than `f64` ones.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum<Self>
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Largest tolerated deviation of a row sum from one.
    const ROW_SUM_TOL: Self;
    /// Magnitudes at or below this are treated as structural zeros.
    const STRUCTURAL_ZERO: Self;

    /// Conversion from `f64`, used for literals and RNG output.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Scalar")
    }

    /// Conversion to `f64`, used for reporting and serialization.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f64 {
    const ROW_SUM_TOL: Self = 1e-12;
    const STRUCTURAL_ZERO: Self = 1e-15;
}

impl Scalar for f32 {
    const ROW_SUM_TOL: Self = 1e-5;
    const STRUCTURAL_ZERO: Self = 1e-7;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerances_scale_with_precision() {
        assert!(f64::ROW_SUM_TOL < f64::from(f32::ROW_SUM_TOL));
        assert!(f64::STRUCTURAL_ZERO < f64::from(f32::STRUCTURAL_ZERO));
    }

    #[test]
    fn f64_round_trip() {
        let x = 0.123456789f64;
        assert_eq!(f64::from_f64_lossy(x), x);
        assert_eq!(x.to_f64_lossy(), x);
    }
}
