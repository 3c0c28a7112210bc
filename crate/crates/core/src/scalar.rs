//! Scalar abstraction for the geometric kernel.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display};

/// Floating-point scalar used by the Möbius, group and series code.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    /// Widens to `f64`.
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + NumAssign
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

#[cfg(test)]
mod tests {
    use super::Real;

    #[test]
    fn literals_round_trip() {
        assert_eq!(<f64 as Real>::lit(0.25), 0.25);
        assert_eq!(<f32 as Real>::lit(0.25), 0.25f32);
        assert_eq!(<f32 as Real>::lit(1.5).to_f64_lossy(), 1.5);
    }
}
