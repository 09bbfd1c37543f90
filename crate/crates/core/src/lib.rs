#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod dataset;
pub mod error;
pub mod fem;
pub mod materials;
pub mod micro;
pub mod oracles;
pub mod surrogate;
pub mod tensor;
pub mod validate;

pub use error::{Error, Result};
