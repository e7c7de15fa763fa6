//! Knapsack and job-shop toolkit: exact oracles, dispatching heuristics,
//! heterogeneous graph encodings, a small multi-type attention policy,
//! optimality-gap benchmarking and a furnace-charging application.

pub mod bench;
pub mod checks;
pub mod error;
pub mod ferro;
pub mod gap;
pub mod graph;
pub mod instances;
pub mod jsp;
pub mod kp;
pub mod mtt;
pub mod rng;

pub use error::{Error, Result};
