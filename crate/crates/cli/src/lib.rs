//! Configuration loading, subcommand orchestration and CSV output for the
//! `ricker-ide` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod run;

pub use config::{load_config, ConfigError, ExperimentConfig};
pub use run::{run, Command, RunError, RunOptions, RunReport};
