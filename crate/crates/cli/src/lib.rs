//! Command-line front end over `bilarx-core`. Every computation is a library
//! call; this crate only parses, loads, and writes files.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod report;

pub use commands::{run, Cli, Command};
pub use error::{CliError, CliResult};
