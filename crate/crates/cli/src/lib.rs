//! IO companion to `adyolo-core`: file formats, configuration, and the
//! pipelines behind the `adyolo` command-line subcommands.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod tensorio;

pub use commands::{run_demo, DemoOptions, DemoOutcome};
pub use config::Config;
