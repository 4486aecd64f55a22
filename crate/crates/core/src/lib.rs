//! Numerical geometry of finite location mixtures.
//!
//! Mixture divergences, the local pseudodistance and its comparison
//! constant, envelope functions, bracket constructions for normalized
//! mixture classes, and global-to-local bracket slicing.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bracketing;
pub mod config;
pub mod density;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod metrics;
pub mod sampling;
pub mod stats;
pub mod tol;

pub use error::{Error, Result};
