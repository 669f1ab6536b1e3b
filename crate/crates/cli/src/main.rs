//! `corral` — run fleet-coordination scenarios, issue certificates,
//! benchmark load profiles and inspect block logs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage/parse/validation
//! error.

mod commands;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use corral_core::scenario::Gating;

#[derive(Parser)]
#[command(name = "corral", version, about = "Attribute-gated robot fleet coordination on a simulated permissioned ledger")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write metric CSVs plus a summary.
    Run {
        /// Scenario file (TOML).
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory for trajectory.csv, latency.csv, visits.csv,
        /// blocks.log and summary.txt.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario's gating switch.
        #[arg(long)]
        gating: Option<Gating>,
    },
    /// Issue an attribute-bearing certificate from a workspace CA.
    Issue {
        /// Issuing organization (must exist in the workspace).
        #[arg(long)]
        org: String,
        /// Subject the certificate is issued to.
        #[arg(long)]
        subject: String,
        /// Comma-separated attribute names.
        #[arg(long, value_delimiter = ',')]
        attributes: Vec<String>,
        /// Workspace directory (defaults to $CORRAL_HOME or `.corral`).
        #[arg(long)]
        workspace: Option<PathBuf>,
        /// Where to write <subject>.cert and <subject>.cert.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a matrix of load profiles and emit a CSV of
    /// (offered_hz, delivered_hz, p50, p95, p99).
    Bench {
        /// Profiles as `<rate_hz>x<publishers>:<on|off>`, e.g.
        /// `50x1:on,50x2:off`.
        #[arg(long, value_delimiter = ',', default_value = "1x1:on,50x1:on,50x2:off")]
        profiles: Vec<String>,
        /// Virtual seconds per profile.
        #[arg(long, default_value_t = 30.0)]
        duration: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Filter and pretty-print a blocks.log file.
    InspectBlocks {
        /// Path to a blocks.log written by `run`.
        #[arg(long)]
        log: PathBuf,
        /// Keep only transactions with this status.
        #[arg(long)]
        status: Option<String>,
        /// Keep only transactions calling this function.
        #[arg(long)]
        function: Option<String>,
    },
}

/// Error carrying the process exit code.
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            gating,
        } => commands::run(&scenario, &out, seed, gating),
        Command::Issue {
            org,
            subject,
            attributes,
            workspace,
            out,
        } => commands::issue(&org, &subject, &attributes, workspace, out),
        Command::Bench {
            profiles,
            duration,
            seed,
            out,
        } => commands::bench(&profiles, duration, seed, out),
        Command::InspectBlocks { log, status, function } => {
            commands::inspect_blocks(&log, status.as_deref(), function.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}
