//! Error-corrected quantum sensing under spatially correlated dephasing.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod code;
pub mod dynamics;
pub mod noise;
pub mod optimize;
pub mod recovery;
pub mod search;
pub mod sensing;

pub use error::{Error, Result};
