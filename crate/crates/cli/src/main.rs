use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cfg = tsrl_cli::RunConfig::parse();
    ExitCode::from(tsrl_cli::run(&cfg))
}
