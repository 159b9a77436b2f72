//! Differentiable sorting networks for right-censored survival data.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod censoring;
pub mod data;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod relaxperm;
pub mod sortnet;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
