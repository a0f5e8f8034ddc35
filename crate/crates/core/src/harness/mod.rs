// SPDX-License-Identifier: Apache-2.0

//! Experiment driver: configuration, result cache, record output and the
//! subcommands behind the `lderiv` binary.

pub mod config;
pub mod run;
pub mod store;
pub mod verify;

pub use config::{RunConfig, CACHE_ENV, CODE_VERSION};
pub use run::{exit_code, run, run_with, Command, Outcome};
pub use store::{JsonlWriter, ResultStore};
