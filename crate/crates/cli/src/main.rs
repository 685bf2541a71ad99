use std::process::ExitCode;

use clap::Parser;
use cqk_cli::Cli;

fn main() -> ExitCode {
    match cqk_cli::run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cqk: {e:#}");
            ExitCode::FAILURE
        }
    }
}
