//! Std side of routebench: file formats, backend adapters, the matrix
//! runner and the CLI. All computation lives in `routebench-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod gateway;
pub mod log_file;
pub mod pool;
pub mod profile_file;
pub mod runner;
pub mod sse;
pub mod tables;

pub use error::{Error, Result};
