//! Online control and simulation of task offloading from a moving vehicle to
//! roadside edge servers over mmWave links.

// `!(x <= y)` is used on purpose so NaN lands on the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod geometry;
pub mod link;
pub mod queue;
pub mod scenario;
pub mod sim;
pub mod units;

pub use error::{Error, Result};
