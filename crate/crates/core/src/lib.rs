// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes_opt;
pub mod collocation;
pub mod correction;
pub mod error;
pub mod gp;
pub mod harness;
pub mod linalg;
pub mod optim;
pub mod richards;
pub mod seed;
pub mod solver;

pub use error::{Error, Result};
