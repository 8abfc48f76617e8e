//! Physics-informed bearing fault classification.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataio;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod transfer;

pub use error::{Error, Result};
