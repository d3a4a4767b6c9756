pub mod benchmark;
pub mod domain;
pub mod error;
pub mod field;
pub mod io;
pub mod model;
pub mod nn;
pub mod optim;
pub mod residual;
pub mod spline;
pub mod training;
pub use error::{Error, Result};
