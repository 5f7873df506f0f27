#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod error;
pub mod geometry;
pub mod mle;
pub mod pattern;
pub mod sim;
pub mod specfun;
pub mod train;

pub use error::{Error, Result};
