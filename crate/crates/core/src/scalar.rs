//! Floating-point scalar abstraction shared by the tensor, model and trainer code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type the numerical core is generic over.
///
/// Implemented for `f32` and `f64`. Training defaults to `f64`; `f32` is
/// usable for inference on frozen parameters.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for constants and stored coefficients.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to every Scalar")
    }

    /// Widen to `f64` (exact for `f32` and `f64`).
    fn to_f64_lossless(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    /// Logistic function `1 / (1 + e^-x)`.
    fn sigmoid(self) -> Self {
        Self::one() / (Self::one() + (-self).exp())
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}
