//! `fractalflux`: scenario-driven front end for the heat transmission lab.

mod commands;
mod scenario;

use clap::{Parser, Subcommand};
use fractalflux::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "fractalflux", version, about = "Heat transmission across prefractal interfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory; overrides `outputs.directory`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Seed of the admissibility sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the interface, measure and mesh files and print the admissibility report.
    Generate(Common),
    /// Solve the transmission problem and write diagnostics.
    Solve(Common),
    /// Sweep prefractal generations.
    Mosco {
        #[command(flatten)]
        common: Common,
        /// Comma-separated generations; overrides `mosco.generations`.
        #[arg(long, value_delimiter = ',')]
        generations: Option<Vec<u32>>,
    },
    /// Search the admissible family for the smallest energy.
    Optimize(Common),
    /// Run the trace invariant suite on the scenario mesh.
    TraceCheck(Common),
}

/// Exit statuses: 0 success, 1 a hard check failed, 2 bad scenario or
/// usage, 3 resource cap, 4 solver failure, 5 I/O.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) | Error::Parse { .. } | Error::Geometry(_) => 2,
        Error::ResourceBound { .. } => 3,
        Error::NoConvergence { .. } | Error::Step { .. } | Error::Mesh(_) => 4,
        Error::Io(_) => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Generate(c) | Command::Solve(c) | Command::Optimize(c) | Command::TraceCheck(c) => c,
        Command::Mosco { common, .. } => common,
    };
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Generate(c) => commands::generate(c),
        Command::Solve(c) => commands::solve(c),
        Command::Mosco { common, generations } => commands::mosco(common, generations.clone()),
        Command::Optimize(c) => commands::optimize(c),
        Command::TraceCheck(c) => commands::trace_check(c),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
