#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod certificates;
pub mod conformal;
pub mod disk;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod pohozaev;
pub mod spline;

pub use error::{Error, Result};
