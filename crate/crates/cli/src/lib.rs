//! Command-line driver and HTTP service for `gdr-core`.
//!
//! `gdr simulate` replays sessions against a clean instance and writes a
//! JSON report plus a curve CSV. `gdr serve` exposes one live session under
//! `/api` for the feedback console.

pub mod args;
pub mod commands;
pub mod server;

use std::fmt;

pub use args::Cli;

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    /// Bad or missing flags.
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<gdr_core::Error> for CliError {
    fn from(e: gdr_core::Error) -> Self {
        let code = match e {
            gdr_core::Error::SchemaMismatch(_) => 2,
            _ => 1,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError {
            code: 1,
            message: e.to_string(),
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    use args::Command;
    match cli.command {
        Command::Repair(a) => commands::repair(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Rank(a) => commands::rank(&a),
        Command::Inject(a) => commands::inject(&a),
        Command::Serve(a) => commands::serve(&a),
    }
}
