//! Std companion to `aorta-mc-core`: configuration and property files, the
//! state-space model file format, multi-worker exploration, report output,
//! and the four CLI commands.

pub mod commands;
pub mod config;
pub mod model_file;
pub mod parallel;
pub mod props;
pub mod report;

use std::fmt;
use std::path::PathBuf;

use aorta_mc_core::checker::{CheckError, ModelError};
use aorta_mc_core::psl::PslEvalError;
use aorta_mc_core::runtime::{InitError, MasError};

/// Anything that stops a command. `exit_code` maps the failure class to the
/// documented process exit codes (2 = bad input, 3 = resource limit).
#[derive(Debug)]
pub enum CliError {
    Io { path: PathBuf, err: std::io::Error },
    /// Malformed configuration file or dangling references inside it.
    Config { path: PathBuf, msg: String },
    /// A program, org spec, property, or percept failed to parse.
    Parse { path: PathBuf, msg: String },
    Init(InitError),
    Step(MasError),
    Eval(PslEvalError),
    Model { path: PathBuf, msg: String },
    ResourceLimit { cap: usize },
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ResourceLimit { .. } => 3,
            _ => 2,
        }
    }

    pub fn from_check(e: CheckError) -> CliError {
        match e {
            CheckError::ResourceLimit { cap } => CliError::ResourceLimit { cap },
            CheckError::Step(e) => CliError::Step(e),
            CheckError::Eval(e) => CliError::Eval(e),
            CheckError::InvalidWitness => {
                CliError::Internal("counterexample replay failed".into())
            }
        }
    }

    pub fn from_model_error(path: &std::path::Path, e: ModelError) -> CliError {
        CliError::Model { path: path.to_path_buf(), msg: e.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, err } => write!(f, "{}: {err}", path.display()),
            CliError::Config { path, msg } => write!(f, "{}: {msg}", path.display()),
            CliError::Parse { path, msg } => write!(f, "{}: {msg}", path.display()),
            CliError::Init(e) => write!(f, "initialization failed: {e}"),
            CliError::Step(e) => write!(f, "execution failed: {e}"),
            CliError::Eval(e) => write!(f, "property evaluation failed: {e}"),
            CliError::Model { path, msg } => write!(f, "malformed model {}: {msg}", path.display()),
            CliError::ResourceLimit { cap } => write!(f, "state cap of {cap} exceeded"),
            CliError::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Deterministic split-mix generator for the seeded run mode.
pub struct Splitmix64(u64);

impl Splitmix64 {
    pub fn new(seed: u64) -> Splitmix64 {
        Splitmix64(seed)
    }

    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}
