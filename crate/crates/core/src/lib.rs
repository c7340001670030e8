//! Security analysis and simulation for continuous-variable QKD with an
//! imbalanced heterodyne receiver.
//!
//! Quadratures are ordered `(x_a, p_a, x_B, p_B)` and measured in shot-noise
//! units. Angles are radians.

// `!(x > bound)` guards are written that way so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod compensation;
pub mod error;
pub mod estimation;
pub mod finite_size;
pub mod gaussian;
pub mod info;
pub mod security;
pub mod simulator;

pub use channel::{build_eb_covariance, build_pm_covariance, PhysicalParams};
pub use error::{Error, Result};
pub use gaussian::{CovMat4, SymMat};
pub use security::{KeyRateReport, KeyRateVariant};
pub use simulator::{QuadratureFrame, SimConfig};
