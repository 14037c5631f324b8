use std::process::ExitCode;

use clap::Parser;
use cone_refine_cli::{run, Cli};

fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}
