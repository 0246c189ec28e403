//! `s6holo`: verify, spectrum, ledger and align commands.
//!
//! Exit status: 0 when every check passes, 1 on a failed check or runtime error,
//! 2 on a usage error (bad flag, unknown curve, impossible request).

mod align_cmd;
mod checks;
mod config;
mod ledger_cmd;
mod report;
mod spectrum;
mod verify;

use clap::{Parser, Subcommand};
use config::{CommonArgs, Defaults, RunConfig};
use std::process::ExitCode;

/// Invalid request; reported with exit status 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Parser)]
#[command(name = "s6holo", version, about = "Holomorphic curves in the nearly-Kahler 6-sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Algebra, nearly-Kahler, frame and identity checks; exit 0 iff all pass
    Verify(CommonArgs),
    /// Lowest Jacobi eigenpairs with eigenvalues.csv and report.json
    Spectrum(CommonArgs),
    /// Chern / Riemann-Roch ledger and genus-degree gate for (g, d)
    Ledger {
        g: u32,
        d: u32,
        #[arg(long)]
        json: bool,
    },
    /// Rotate a curve in SO(7) until it is J-holomorphic
    Align(CommonArgs),
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Verify(a) => verify::run(&RunConfig::resolve(&a, &Defaults { curve: "boruvka", mesh_level: 5 })?),
        Command::Spectrum(a) => spectrum::run(&RunConfig::resolve(&a, &Defaults { curve: "boruvka", mesh_level: 5 })?),
        Command::Align(a) => align_cmd::run(&RunConfig::resolve(&a, &Defaults { curve: "boruvka-raw", mesh_level: 1 })?),
        Command::Ledger { g, d, json } => ledger_cmd::run(g, d, json),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            if let Some(u) = e.downcast_ref::<Usage>() {
                eprintln!("error: {u}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}
