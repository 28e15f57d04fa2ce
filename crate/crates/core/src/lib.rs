//! Training graph neural networks on features and labels collected under
//! local differential privacy.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod graph;
pub mod ldp;
pub mod linalg;
pub mod nn;
pub mod propagate;
pub mod train;

pub use error::{Error, Result};
