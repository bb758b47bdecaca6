//! Self-testing correlations for bipartite pure states.
//!
//! Builds the ideal strategies of the tilted-CHSH, many-answers and
//! many-questions families, evaluates and verifies their correlations,
//! runs the swap-isometry extraction and the scaling experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlation;
pub mod error;
pub mod experiments;
pub mod extract;
pub mod linalg;
pub mod states;
pub mod strategy;
pub mod verify;

pub use error::{Error, Result};
