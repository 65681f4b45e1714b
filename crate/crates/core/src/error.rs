use thiserror::Error;

use crate::cap::Regime;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("contact angle {0} is outside (0, pi)")]
    AngleOutOfRange(f64),

    #[error("operation requires a {required} contact angle, got {got:?} (theta = {theta})")]
    Regime {
        required: &'static str,
        got: Regime,
        theta: f64,
    },

    #[error("dimension {0} is not supported here (expected {1})")]
    UnsupportedDimension(usize, &'static str),

    #[error("point is not on the cap: {0}")]
    NotOnCap(String),

    #[error("coordinate {index} = {value} is not strictly positive")]
    NonPositiveCoordinate { index: usize, value: f64 },

    #[error("point {0:?} lies on the critical cone |y_n| = |y| cos(theta); branch is ambiguous")]
    BranchAmbiguity(Vec<f64>),

    #[error("forward map left the range cone by {0:e}")]
    RangeViolation(f64),

    #[error("resolution {got} is below the minimum {min}")]
    Resolution { got: usize, min: usize },

    #[error("integrand is not finite ({value}) at node {index} ({node:?})")]
    NonFinite {
        index: usize,
        node: Vec<f64>,
        value: f64,
    },

    #[error("support function is not positive ({value}) at node {index} ({node:?})")]
    NonPositiveSupport {
        index: usize,
        node: Vec<f64>,
        value: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("boundary derivative {derivative:e} exceeds {tolerance:e} ({context})")]
    BoundaryCondition {
        derivative: f64,
        tolerance: f64,
        context: &'static str,
    },

    #[error("perturbed support function is not convex (h + h'' = {0:e}); reduce the step")]
    NotConvex(f64),

    #[error("body kind `{0}` has no closed-form polar gauge")]
    NoPolarGauge(String),

    #[error("body spec: {0}")]
    BodySpec(String),
}
