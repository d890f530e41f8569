//! `chartqa`: command-line front end.
//!
//! Exit status 0 means no findings, 1 means quality findings were reported
//! and 2 means the run itself failed.

mod args;
mod commands;
mod config;
mod corpus;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::commands::Status;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match args::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = config::Settings::from_env(cli.global).and_then(|s| commands::run(cli.command, &s));
    match result {
        Ok(Status::Clean) => ExitCode::from(0),
        Ok(Status::Findings) => ExitCode::from(1),
        Err(e) => {
            eprintln!("chartqa: {e:#}");
            ExitCode::from(2)
        }
    }
}
