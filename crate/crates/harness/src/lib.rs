//! Experiment driver for `lpdo-core`: state generation, truncation and
//! optimized pruning runs over cutoff grids, the injectivity round trip,
//! exponential fits and state verification. Results are written as CSV.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod fit;

pub use config::{ExperimentConfig, StateKind};
pub use error::{HarnessError, Result};
pub use fit::{fit_exponential, FitResult};
