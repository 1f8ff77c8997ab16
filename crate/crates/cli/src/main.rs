//! `cyclic-dde` command-line tool.

mod app;
mod args;
mod manifest;
mod overrides;

use std::process::ExitCode;

use thiserror::Error;

/// Bad invocation: unknown flag, unparsable value, unreadable model file.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Debug, Error)]
pub enum Failure {
    #[error("usage: {0}")]
    Usage(#[from] UsageError),
    #[error("{0}")]
    Domain(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Domain(_) => 1,
        }
    }
}

impl From<cyclic_dde::Error> for Failure {
    fn from(e: cyclic_dde::Error) -> Self {
        use cyclic_dde::Error as E;
        match e {
            E::Parse { .. }
            | E::Field { .. }
            | E::UnknownPreset(_)
            | E::UnknownParameter(_)
            | E::MissingParameter(_)
            | E::InvalidModel(_)
            | E::InvalidConfig(_)
            | E::InvalidTailMass(_) => Failure::Usage(UsageError(e.to_string())),
            other => Failure::Domain(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    match app::run(&argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let line = f.to_string().replace('\n', " ");
            eprintln!("cyclic-dde: {}", line.trim());
            ExitCode::from(f.exit_code())
        }
    }
}
