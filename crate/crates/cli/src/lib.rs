//! Command-line front end for flock inverse optimal control: synthetic data,
//! track CSV ingestion, IOC runs and identifiability diagnostics.

pub mod cli;
pub mod error;
pub mod io;
pub mod report;
pub mod run;
pub mod synth;

pub use error::{CliError, Result};
