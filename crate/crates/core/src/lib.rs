// `!(x > y)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod io;
pub mod numkernel;
pub mod pipeline;
pub mod pretrain;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub mod boundary;
pub mod config;
pub mod corpus;
