use std::process::ExitCode;

use clap::Parser;
use lrk_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match lrk_cli::run(&cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("lrk: {e}");
            ExitCode::from(e.code())
        }
    }
}
