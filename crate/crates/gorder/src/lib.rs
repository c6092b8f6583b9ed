//! File formats, reports and subcommands of the `gorder` command line tool.

pub mod commands;
pub mod file;
pub mod output;

use std::fmt;

use serde::Serialize;

/// Exit codes of the command line tool.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const NO_VERDICT: i32 = 1;
    pub const INPUT: i32 = 2;
    pub const SOLVER: i32 = 3;
    pub const EMPIRICAL_FAILURE: i32 = 4;
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> CliError {
        CliError {
            code: exit::INPUT,
            message: message.into(),
        }
    }

    pub fn solver(message: impl Into<String>) -> CliError {
        CliError {
            code: exit::SOLVER,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<gorder_core::Error> for CliError {
    fn from(e: gorder_core::Error) -> CliError {
        use gorder_core::Error as E;
        let code = match e {
            E::Parse(_) | E::InvalidSpec(_) | E::ZeroScale | E::ParameterViolation(_) | E::UnknownScenario(_) => {
                exit::INPUT
            }
            E::Eval(_) | E::GridTooCoarse(_) | E::NonFinite { .. } | E::NonFinitePath { .. } | E::OutOfGrid(_) => {
                exit::SOLVER
            }
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

/// Name and version embedded in every report.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

pub const TOOL: Tool = Tool {
    name: env!("CARGO_PKG_NAME"),
    version: env!("CARGO_PKG_VERSION"),
};

/// Caps the rayon pool at `GORDER_THREADS` when set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("GORDER_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::input(format!("GORDER_THREADS must be a positive integer, got '{v}'")))?;
    // A second initialization (tests in one process) keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
