//! `pepscan`: simulate runs, compute the detection efficiency, calibrate,
//! analyze current-on/off pairs, compute and project limits, and reproduce the
//! published limit.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Exit-code classes: 1 for domain errors and failed checks, 2 for usage.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Domain(String),
}

impl Failure {
    pub fn usage(msg: impl std::fmt::Display) -> Self {
        Failure::Usage(msg.to_string())
    }

    pub fn domain(msg: impl std::fmt::Display) -> Self {
        Failure::Domain(msg.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {}", msg.replace('\n', " "));
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {}", msg.replace('\n', " "));
            ExitCode::from(2)
        }
    }
}
