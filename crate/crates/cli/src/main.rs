mod args;
mod commands;
mod table;

use std::process::ExitCode;

use clap::Parser;
use phasecal::ErrorKind;

use args::{Cli, Command};

/// Exit status of a run.
///
/// 0 success, 1 failed truth check, 2 validation, 3 I/O, 4 numerical
/// degeneracy, 5 provenance mismatch.
#[derive(Debug)]
pub enum Failure {
    Library(phasecal::Error),
    Usage(String),
    CheckFailed(String),
}

impl From<phasecal::Error> for Failure {
    fn from(e: phasecal::Error) -> Self {
        Failure::Library(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::CheckFailed(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Library(e) => match e.kind() {
                ErrorKind::Validation => 2,
                ErrorKind::Io => 3,
                ErrorKind::Numerical => 4,
                ErrorKind::Provenance => 5,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Library(e) => write!(f, "{e}"),
            Failure::Usage(m) | Failure::CheckFailed(m) => f.write_str(m),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.parallel {
        if threads == 0 {
            eprintln!("error: --parallel must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(4);
        }
    }
    let result = match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Apply(a) => commands::apply(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
