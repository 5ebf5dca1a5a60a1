//! Experiment suite for the decentralized IRSA learners: sweeps,
//! convergence measurement, virtual-experience ablations, the waterfall
//! parameterizations and CSV reporting.

pub mod checks;
pub mod config;
pub mod convergence;
pub mod coverage;
pub mod error;
pub mod pool;
pub mod report;
pub mod sweep;
pub mod virtual_compare;
pub mod waterfall;

pub use error::{HarnessError, Result};
