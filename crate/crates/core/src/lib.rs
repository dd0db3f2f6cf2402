//! Stochastic trust-region methods with a gradient-scaled radius, sampled
//! models with adaptive batch sizes, and limited-memory SR1 subproblems.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod driver;
pub mod error;
pub mod harness;
pub mod lsr1;
pub mod model;
pub mod parallel;
pub mod problems;
pub mod sampling;
pub mod subproblem;

pub use error::{Error, Result};
