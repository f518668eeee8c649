//! Experiment runner for switched-system stability studies.
//!
//! Exit codes: 0 ok; 1 refuted certificate / invalid signal under `--strict`;
//! 2 configuration error; 3 numeric failure. The environment variable
//! `SWITCHSTAB_SEED` overrides every config- or flag-provided seed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

#[derive(Parser)]
#[command(name = "switchstab", version, about = "Simulate and certify switched dynamical systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
struct ClassFlags {
    /// Signal class: dwell | adt | ergodic | graph
    #[arg(long)]
    class: Option<String>,
    /// Dwell / average dwell time
    #[arg(long)]
    tau_d: Option<f64>,
    /// Chatter bound for the adt class
    #[arg(long)]
    n0: Option<u32>,
    /// Window length for the ergodic class
    #[arg(long)]
    window: Option<f64>,
    /// Comma-separated mode list, e.g. "1,2,3"
    #[arg(long)]
    modes: Option<String>,
    /// Successor edges for the graph class, e.g. "1>2,2>1"
    #[arg(long)]
    edges: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a switching signal of a class and write it as JSON
    GenerateSignal {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        class: ClassFlags,
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        initial_mode: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a stored signal against a class and report the first violation
    ValidateSignal {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        class: ClassFlags,
        /// Signal JSON file
        #[arg(long)]
        signal: Option<PathBuf>,
        /// Exit with code 1 when the signal is invalid
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a trajectory and write it as CSV
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the omega-limit set and its switch-aware refinement
    Limits {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the hypotheses of a stability/convergence rule
    Certify {
        /// Rule id: convergence0 | ergodicconv | convergence1 | convergence2
        /// | guas1 | guas2 | guas2bis | corollary_final
        #[arg(long)]
        theorem: String,
        #[arg(long)]
        config: PathBuf,
        /// Exit with code 1 when the certificate is refuted
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run seeded stability trials and write per-trial statistics as CSV
    StabilitySweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Combine previously written artifacts into a text summary
    Report {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        certificate: Option<PathBuf>,
        #[arg(long)]
        validation: Option<PathBuf>,
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long)]
        limits: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Error category mapped to the documented exit codes.
pub enum Failure {
    /// Exit 1: refuted certificate or invalid signal under --strict.
    Strict(String),
    /// Exit 2: configuration problem.
    Config(anyhow::Error),
    /// Exit 3: numeric failure during integration or certification.
    Numeric(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Strict(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Strict(msg) => eprintln!("switchstab: {msg}"),
                Failure::Config(err) => eprintln!("switchstab: configuration error: {err:#}"),
                Failure::Numeric(err) => eprintln!("switchstab: numeric failure: {err:#}"),
            }
            ExitCode::from(failure.code())
        }
    }
}
