//! Command-line front end: argument parsing, command dispatch and report
//! writers. The `lrk` binary is a thin wrapper around [`run`].

pub mod args;
mod audit;
pub mod error;
mod kernel;
mod lap;
pub mod parse;
pub mod report;
mod resonance;
mod stone;

use std::ffi::OsString;

use args::{Cli, Command};
use clap::Parser;
use error::CliError;

/// Process exit status of a finished command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    ToleranceFailure,
    NonConvergence,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::ToleranceFailure => 1,
            Status::NonConvergence => 3,
        }
    }

    /// Combine a pass/fail verdict with the convergence warnings of a run.
    pub fn from_checks(pass: bool, warned: bool, strict: bool) -> Status {
        if !pass {
            Status::ToleranceFailure
        } else if warned && strict {
            Status::NonConvergence
        } else {
            Status::Success
        }
    }
}

/// Execute one parsed command line. With `--threads` the command runs in a
/// dedicated pool of that size.
pub fn run(cli: &Cli) -> Result<Status, CliError> {
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))?
            .install(|| dispatch(cli)),
        None => dispatch(cli),
    }
}

/// Parse a command line given without the program name, then [`run`] it.
pub fn run_args<I, T>(args: I) -> Result<Status, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv = std::iter::once(OsString::from("lrk")).chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(e.to_string()))?;
    run(&cli)
}

fn dispatch(cli: &Cli) -> Result<Status, CliError> {
    let quad = cli.quadrature()?;
    match &cli.command {
        Command::Kernel(a) => kernel::run(cli, a, &quad),
        Command::Resonance(a) => resonance::run(cli, a, &quad),
        Command::Stone(a) => stone::run(cli, a, &quad),
        Command::Lap(a) => lap::run(cli, a, &quad),
        Command::Audit(a) => audit::run(cli, a, &quad),
    }
}
