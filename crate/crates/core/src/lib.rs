//! Nonlinear regression with an outlier guard.
//!
//! Ensembles of extreme learning machines are fitted on min-max scaled
//! inputs. Test inputs that a Mahalanobis gate flags as outliers get their
//! ensemble prediction replaced by the median of a few linear extrapolations
//! of the fitted surface from the nearest training point.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod extrapolate;
pub mod gate;
pub mod harness;
pub mod numkernel;
pub mod persist;
pub mod preprocess;
pub mod regress;
pub mod seed;

pub use error::{Error, Result};
