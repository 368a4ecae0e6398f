//! Library side of the `gwde` command-line tool: config handling, output files,
//! and one function per subcommand.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Command};
pub use config::RunConfig;
pub use error::CliError;
