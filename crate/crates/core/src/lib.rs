//! Symbol-level precoding with constructive interference: system model,
//! barrier proximity operators, convex baselines and the unfolded network.

pub mod error;
pub mod model;
pub mod net;
pub mod prox;
pub mod solvers;

pub use error::{Result, SlpError};
