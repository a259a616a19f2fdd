//! Data generation, training, sweeps and timing for the SLP solvers and SLP-DNet.

pub mod config;
pub mod data;
pub mod error;
pub mod scheme;
pub mod sweep;
pub mod timing;
pub mod train;

pub use config::RunConfig;
pub use error::{BenchError, Result};
pub use scheme::SchemeId;
