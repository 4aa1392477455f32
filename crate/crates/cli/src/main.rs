//! `cvgate` runs the single-photon preparation, the nonlinear sign gate and
//! the transmittance search from the command line, writing plot-ready CSV or
//! JSON plus a run manifest.
//!
//! Exit codes: 0 on success, 2 for usage errors, 3 when the numerics fail
//! (truncation, quadrature, integration grid or a vanishing herald), 1 for
//! anything else such as I/O.

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cvgate_core::SimError;

mod commands;
mod output;

/// Invalid flags or flag combinations detected after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(
    name = "cvgate",
    version,
    about = "Photonic circuit simulation in a truncated Fock space"
)]
struct Cli {
    /// Worker threads for parallel sweeps and integrals.
    #[arg(long, global = true, env = "CVGATE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single photon from copies of a Fock-superposition resource.
    PrepSinglePhoton(commands::PrepArgs),
    /// Process fidelity and success probability of the nonlinear sign gate.
    Nsg(commands::NsgArgs),
    /// Multi-start search for the pipeline transmittances.
    Optimize(commands::OptimizeArgs),
}

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<SimError>() {
        Some(e) if e.is_numerical() => EXIT_NUMERICAL,
        Some(_) => EXIT_USAGE,
        None => 1,
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(UsageError("the thread count must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::PrepSinglePhoton(args) => commands::prep_single_photon(args),
        Command::Nsg(args) => commands::nsg(args),
        Command::Optimize(args) => commands::optimize(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
