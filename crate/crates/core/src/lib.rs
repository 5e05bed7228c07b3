// negated comparisons reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod observables;
pub mod qfi;
pub mod qnd;
pub mod ramsey;
pub mod state;

pub use error::{Error, Result};
