//! `kltail` command line: standardize samples, run the two-sample test,
//! simulate copula data, and drive the Monte Carlo and rainfall studies.
//!
//! Exit codes: 0 success (test not rejected), 3 test rejected, 2 usage or
//! configuration error, 4 numerical failure, 5 input or data error.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
            eprintln!("error: cannot start {workers} workers: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<kltail::Error>() {
        Some(kltail::Error::Config(_)) | Some(kltail::Error::UnsupportedDimension { .. }) => 2,
        Some(err) if err.is_numerical() => 4,
        Some(kltail::Error::Unattainable { .. }) => 2,
        _ if e.downcast_ref::<commands::UsageError>().is_some() => 2,
        _ => 5,
    }
}
