//! Scalar abstraction shared by every evaluator in the crate.
//!
//! Metric fields, surface connections and the curvature engine are written
//! once against [`Scalar`] and instantiated with `f64`, `f32`, or the
//! forward-mode [`Dual`](crate::dual::Dual) numbers used to obtain exact
//! partial derivatives.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar usable by the tensor engine.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lifts an `f64` constant into the scalar type.
    fn lit(v: f64) -> Self;

    /// Primal (value) part as `f64`; for dual numbers the derivative parts are dropped.
    fn re(self) -> f64;
}

impl Scalar for f64 {
    #[inline]
    fn lit(v: f64) -> Self {
        v
    }

    #[inline]
    fn re(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn re(self) -> f64 {
        self as f64
    }
}
