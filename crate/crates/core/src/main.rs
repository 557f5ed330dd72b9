use std::process::ExitCode;

use clap::Parser;
use v2x_edge::cli::{execute, Cli};

fn main() -> ExitCode {
    execute(Cli::parse())
}
