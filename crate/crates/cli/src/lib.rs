//! Command-line harness: scenario files, run and sweep outputs, validation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod format;
pub mod output;

pub use commands::{cmd_run, cmd_sweep, cmd_validate, Outcome};
pub use config::{load_scenario, parse_scenario, ConfigError};
