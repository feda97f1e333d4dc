//! Lie sphere geometry and extrinsic curvature of submanifolds in space forms.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod classify;
pub mod cli;
pub mod error;
pub mod immersion;
pub mod jet;
pub mod legendre;
pub mod lie;
pub mod minkowski;
pub mod plan;

pub use error::{GeomError, Result};
