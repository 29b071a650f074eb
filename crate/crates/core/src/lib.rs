//! Teacher–student experiments for two-layer networks trained with online SGD
//! and weight decay.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: dense matrices, seeded random streams, SVD/QR.
//! - [`model`]: activations, losses, the student network and teacher models.
//! - [`geometry`]: projection onto the teacher subspace, alignment, rank truncation.
//! - [`optimize`]: step-size schedules, online SGD, population gradient descent,
//!   second-layer training and the two-phase single-index learner.
//! - [`population`]: Monte-Carlo estimators of risks, gradients and curvature,
//!   and the random-bias second-layer construction.
//! - [`harness`]: experiment specs, runners and artifact writers used by the
//!   `psub` binary.

// NaN must fail argument checks, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod optimize;
pub mod population;

pub use error::{Error, Result};
