//! Experiment harness for `rwmlab`: configuration files, the `rwmlab`
//! command-line tool and reproducible CSV/JSON/plot output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod figure1;
pub mod output;

pub use config::{parse_config, ConfigError, ConfigErrors, EllGrid, ExperimentConfig, Workers};
pub use error::{HarnessError, Result};
pub use figure1::{run_figure1, Figure1Output, RunOptions};
