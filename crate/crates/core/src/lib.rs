// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Capillary convex geometry: the cap `C_θ`, its support and gauge functions,
//! polar volumes and the capillary volume product, with oracle-backed checks.

pub mod bodies;
pub mod cap;
pub mod error;
pub mod fd;
pub mod functionals;
pub mod linearized;
pub mod obtuse;
pub mod quadrature;
pub mod report;
pub mod spectral;
pub mod suite;
pub mod verification;

pub use error::{Error, Result};
