//! Command-line front end: the built-in interferometer sweeps, netlist runs
//! and CSV output.

pub mod commands;
pub mod netlists;
pub mod output;
pub mod theory;

use std::fmt;
use std::path::PathBuf;

pub use commands::{cmd_hom, cmd_mzi, cmd_run, CommonOptions, HomOptions, MziOptions, Report};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Simulation(photonpool::Error),
    Io(PathBuf, std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Simulation(e) => write!(f, "{e}"),
            CliError::Io(path, e) => write!(f, "{}: {e}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<photonpool::Error> for CliError {
    fn from(e: photonpool::Error) -> Self {
        CliError::Simulation(e)
    }
}
