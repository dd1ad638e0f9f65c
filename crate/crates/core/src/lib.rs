//! Verification toolkit for pseudo-Riemannian metrics with parallel Weyl
//! tensor (essentially conformally symmetric metrics).
//!
//! Numerical code is generic over [`Scalar`]; the aliases below fix `f64`.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chartcalc;
pub mod d1family;
pub mod d2family;
pub mod dual;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod ode;
pub mod olszak;
pub mod riccati;
pub mod scalar;
pub mod series;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Dual64 = dual::Dual<f64>;
pub type CurvaturePack64 = chartcalc::CurvaturePack<f64>;
pub type CurvaturePack32 = chartcalc::CurvaturePack<f32>;
