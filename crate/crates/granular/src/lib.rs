//! Kinetic simulation and numerical verification for granular gases with
//! speed-dependent restitution.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::needless_range_loop)]

pub mod collision;
pub mod diagnostics;
pub mod dissipation;
pub mod dsmc;
pub mod error;
pub mod hydro;
pub mod quadrature;
pub mod reduce;
pub mod restitution;
pub mod rng;
pub mod scaling;
pub mod vec3;

pub use error::{Error, Result};
