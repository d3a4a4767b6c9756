//! Command-line and WebSocket front ends for the spline PDE engine.

pub mod cli;
pub mod error;
pub mod protocol;
pub mod server;
pub mod session;

pub use error::{Result, ServiceError};
