//! Command-line front end for the convertible-bond game solver.

pub mod commands;
pub mod config;

pub use commands::{run_fit, run_selfcheck, run_simulate, run_solve, Outcome, Status};
pub use config::{ConfigError, RunConfig};
