//! Command-line front end: argument parsing, report schemas and file output
//! for the `tsauc` binary.

pub mod args;
pub mod commands;
pub mod output;
pub mod report;

use std::path::PathBuf;

use thiserror::Error;

/// Process exit status for each failure family.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE_OR_IO: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] tsauc::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use tsauc::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io { .. } => exit::USAGE_OR_IO,
            CliError::Validation(_) => exit::VALIDATION,
            CliError::Core(e) => match e {
                E::Io { .. } => exit::USAGE_OR_IO,
                E::Parse { .. } | E::Validation(_) | E::InvalidArgument(_) => exit::VALIDATION,
                E::Infeasible(_) | E::NoOobTrees { .. } => exit::INFEASIBLE,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Parses `argv` and runs the selected command, returning the exit status.
/// Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE_OR_IO } else { exit::OK };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
