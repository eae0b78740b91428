//! File formats and the `genbayes` command line on top of `genbayes-core`.
//!
//! Each subcommand reads a TOML config (optional where every setting has a
//! default), applies flag overrides, validates everything, runs one
//! pipeline and writes CSV tables whose first line is a `#` run header.

pub mod cli;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod output;
pub mod steps;

pub use cli::{Cli, Command, Flags};
pub use error::{CliError, Result};

/// Runs one parsed command and returns its exit status on success.
pub fn run(cli: &Cli) -> Result<i32> {
    let flags = cli.command.flags();
    match &cli.command {
        Command::Fit(_) => commands::fit(flags),
        Command::CoxBf(_) => commands::cox_bf(flags),
        Command::CoxSelect(_) => commands::cox_select(flags),
        Command::Boxplot(_) => commands::boxplot(flags),
        Command::Misspec(_) => commands::misspec(flags),
        Command::Simulate(_) => commands::simulate(flags),
    }
}
