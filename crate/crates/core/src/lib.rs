//! Penalty decomposition derivative-free optimization for finite sums of
//! coordinate partially separable black-box functions.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod bench;
pub mod dfsearch;
pub mod config;
pub mod error;
pub mod parallel;
pub mod penalty;
pub mod problem;
pub mod report;
pub use error::{Error, Result};
