use std::process::ExitCode;

use clap::Parser;
use genbayes::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("genbayes {}: error: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
