//! File formats, run directories, sweeps and the command-line front end for
//! `semnet-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod format;
pub mod output;
pub mod sweep;

pub use error::Error;
