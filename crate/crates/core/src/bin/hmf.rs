use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hmf_core::cli::{run, Command};

#[derive(Parser)]
#[command(
    name = "hmf",
    version,
    about = "Unstable steady states of the HMF model"
)]
struct Args {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario JSON document.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the scenario's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "HMF_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Build the self-consistent steady state.
    Steady(Common),
    /// Evaluate the instability criterion.
    Kappa(Common),
    /// Sample the dispersion function and look for its root.
    Dispersion(Common),
    /// Write the unstable eigenmode grid.
    Mode(Common),
    /// Perturbed nonlinear runs over the configured amplitudes.
    Evolve(Common),
    /// Check the separatrix constants.
    VerifyAppendix(Common),
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (command, common) = match args.command {
        Sub::Steady(c) => (Command::Steady, c),
        Sub::Kappa(c) => (Command::Kappa, c),
        Sub::Dispersion(c) => (Command::Dispersion, c),
        Sub::Mode(c) => (Command::Mode, c),
        Sub::Evolve(c) => (Command::Evolve, c),
        Sub::VerifyAppendix(c) => (Command::VerifyAppendix, c),
    };
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot size thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(command, &common.config, common.out.as_deref()) {
        Ok(manifest) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&manifest.derived).unwrap_or_default()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
