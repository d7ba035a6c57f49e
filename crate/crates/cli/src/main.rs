// Copyright 2026 HamForge Contributors
// SPDX-License-Identifier: Apache-2.0

//! `hamforge` command-line drivers.
//!
//! Frequencies and couplings on the command line and in files are kHz
//! (angular frequency / 2π / 1000); times are ms. Every CSV written with
//! `--out` gets a `<out>.json` sidecar from which `hamforge replay`
//! regenerates the CSV bit for bit.

mod commands;

use std::process::ExitCode;

use clap::Parser;

use commands::{Command, RunError};

#[derive(Debug, Parser)]
#[command(name = "hamforge", version, about = "Gradient-filtered coupling engineering for dipolar spin networks")]
#[command(after_help = "Units: frequencies and couplings in kHz (ω/2π·10⁻³), times in ms, positions in units of the NN spacing r₀.\n\
Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match commands::run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                RunError::Core(ref c) if c.is_numerical() => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
