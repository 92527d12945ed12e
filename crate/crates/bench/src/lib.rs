//! Synthetic benchmark tasks, experiment sweeps and reports built on the
//! `bridger` crate, plus the library side of the `bridger` command line.

pub mod cells;
pub mod cli;
pub mod config;
pub mod error;
pub mod report;
pub mod svg;
pub mod sweep;
pub mod tasks;

pub use error::{BenchError, Result};
