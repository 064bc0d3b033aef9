//! Resolution information: the least KL belief update that brings semantic
//! ambiguity under a target, for discrete beliefs, Gaussian beliefs and
//! repeated sampling.

// `!(x > 0.0)` is used on purpose so that NaN lands in the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beliefs;
pub mod error;
pub mod figures;
pub mod gaussian;
pub mod large_deviations;
pub mod resolution;
pub mod special;

pub use error::{Error, Result};
