use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "genbayes", version, about = "Loss-based Bayesian updating from the command line")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the posterior of a loss, prior and weight rule on a CSV
    Fit(Flags),
    /// Per-marker Bayes factors under the Cox partial loss
    CoxBf(Flags),
    /// Variable-selection chain over markers under the Cox partial loss
    CoxSelect(Flags),
    /// Quartile credible intervals per group
    Boxplot(Flags),
    /// Concentration of the posterior around the KL-closest parameter
    Misspec(Flags),
    /// Generate a synthetic dataset and its manifest
    Simulate(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::CoxBf(_) => "cox-bf",
            Command::CoxSelect(_) => "cox-select",
            Command::Boxplot(_) => "boxplot",
            Command::Misspec(_) => "misspec",
            Command::Simulate(_) => "simulate",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Fit(f)
            | Command::CoxBf(f)
            | Command::CoxSelect(f)
            | Command::Boxplot(f)
            | Command::Misspec(f)
            | Command::Simulate(f) => f,
        }
    }
}

/// Flags shared by all commands; each overrides the matching config key.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Total sampler iterations
    #[arg(long)]
    pub iters: Option<usize>,
    /// Iterations discarded before recording
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Primary output file; secondary outputs are written next to it
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Input data file
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Evidence method(s): laplace, quadrature, importance
    #[arg(long, value_delimiter = ',')]
    pub method: Option<Vec<String>>,
    /// Credible level of reported intervals
    #[arg(long)]
    pub level: Option<f64>,
    /// Importance-sampling draws per marker
    #[arg(long)]
    pub is_draws: Option<usize>,
}

impl Flags {
    /// Fails if any of the named flags was given.
    pub fn reject(&self, command: &str, names: &[&str]) -> Result<()> {
        for name in names {
            let given = match *name {
                "iters" => self.iters.is_some(),
                "burnin" => self.burnin.is_some(),
                "data" => self.data.is_some(),
                "method" => self.method.is_some(),
                "level" => self.level.is_some(),
                "is-draws" => self.is_draws.is_some(),
                _ => false,
            };
            if given {
                return Err(CliError::config(format!("--{name} does not apply to {command}")));
            }
        }
        Ok(())
    }
}
