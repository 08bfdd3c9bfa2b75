//! `blocktime`: simulate, fetch, fit and plot block-time distributions of
//! BFT consensus chains.
//!
//! Every command writes a `.manifest` key-value file next to its main
//! output. `blocktime replay --manifest FILE` reruns the recorded command
//! from the manifest's config snapshot.
//!
//! Exit codes: `0` success, `1` input/output failure, `2` usage error,
//! `3` numerical failure, `4` transport failure.

mod commands;
mod config;
mod manifest;
mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use commands::{FetchArgs, FitArgs, PlotArgs, ReplayArgs, SimulateArgs};
pub use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(
    name = "blocktime",
    version,
    about = "Block-time modelling for BFT consensus chains"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo block times from the broadcast chain.
    Simulate(SimulateArgs),
    /// Fit the closed-form k-phase density to an interval file.
    Fit(FitArgs),
    /// Download header times from a Tendermint RPC node.
    Fetch(FetchArgs),
    /// Draw a histogram with a fitted curve as SVG.
    Plot(PlotArgs),
    /// Rerun the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Transport(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io(_) => 1,
            Self::Usage(_) => 2,
            Self::Numerical(_) => 3,
            Self::Transport(_) => 4,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// `path` with `suffix` appended to its file name.
pub(crate) fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(OsString::from).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

/// Parse `args` (including the program name), merge any `--config` file
/// and run the command. Messages go to `stderr`; returns the exit code.
pub fn run<I, T>(args: I, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let merged = match config::merge_config(&args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(&merged) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    2
                }
            };
        }
    };
    match execute(cli.command, &args, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub(crate) fn execute(command: Command, argv: &[OsString], stderr: &mut dyn Write) -> Result<()> {
    // the program path varies between installs; record a fixed name
    let line = std::iter::once("blocktime".to_string())
        .chain(argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()))
        .collect::<Vec<_>>()
        .join(" ");
    match command {
        Command::Simulate(a) => commands::simulate(&a, &line, stderr),
        Command::Fit(a) => commands::fit(&a, &line, stderr),
        Command::Fetch(a) => commands::fetch(&a, &line, stderr),
        Command::Plot(a) => commands::plot(&a, &line, stderr),
        Command::Replay(a) => commands::replay(&a, stderr),
    }
}
