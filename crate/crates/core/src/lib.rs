//! Graph-based time-of-arrival estimation and phase unwrapping for
//! head-related impulse responses.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsp;
pub mod error;
pub mod eval;
pub mod graph;
pub mod hrir;
pub mod hull;
pub mod l1;
pub mod ls;
pub mod sh;
mod par;
pub mod synth;
pub mod toa;
pub mod unwrap;

pub use error::{Error, Result};
