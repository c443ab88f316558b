#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod entanglement;
pub mod error;
pub mod estimator;
pub mod ins;
pub mod pipeline;
pub mod spectral;
pub mod spin;
pub mod trotter;
pub(crate) mod util;

pub use error::{Error, Result};
