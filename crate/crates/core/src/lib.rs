//! Hierarchy-aware contrastive protein pretraining and GIN-based
//! multi-label protein interaction prediction, with split benchmarking.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod cli;
pub mod dataio;
pub mod encoders;
pub mod error;
pub mod hierarchy;
pub mod numcore;
pub mod ppinet;
pub mod splitbench;

pub use error::{Error, Result};
