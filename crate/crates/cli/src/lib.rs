//! Command-line driver for the `tryinfo` library: sweeps, identity checks and
//! kernel dumps written as annotated CSV.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod commands;
pub mod config;
pub mod error;

pub use app::run;
pub use error::CliError;
