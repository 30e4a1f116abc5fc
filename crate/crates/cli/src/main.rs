use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qbm_cli::commands::{cmd_coeffs, cmd_evolve, cmd_phase_diagram, cmd_verify, with_workers, Context};
use qbm_cli::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "qbm", version, about = "Entanglement of two oscillators in a common bath")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "QBM_WORKERS", default_value_t = default_workers())]
    workers: usize,
    /// Allow times beyond the discretization horizon.
    #[arg(long)]
    override_horizon: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Exact Gaussian evolution of system plus bath.
    Evolve(Common),
    /// Exact master-equation coefficients (symmetric coupling).
    Coeffs(Common),
    /// SD / SDR / NSD classification over the sweep grid.
    PhaseDiagram(Common),
    /// Cross-check predicted phases against exact simulations.
    Verify(Common),
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn run(cli: Cli) -> Result<String, CliError> {
    let (args, which) = match &cli.command {
        Command::Evolve(a) => (a, "evolve"),
        Command::Coeffs(a) => (a, "coeffs"),
        Command::PhaseDiagram(a) => (a, "phase-diagram"),
        Command::Verify(a) => (a, "verify"),
    };
    let cfg = RunConfig::load_with(&args.config, args.override_horizon)?;
    let ctx = Context::new(cfg, args.out.clone());
    let out = ctx.out.display().to_string();
    with_workers(args.workers, || -> Result<String, CliError> {
        Ok(match which {
            "evolve" => format!("wrote {} trajectories to {out}", cmd_evolve(&ctx)?.len()),
            "coeffs" => format!("wrote {} coefficient traces to {out}", cmd_coeffs(&ctx)?.len()),
            "phase-diagram" => {
                let s = cmd_phase_diagram(&ctx)?;
                let failed = s.results.iter().filter(|r| r.summary().is_none()).count();
                format!("classified {} points ({failed} failed) into {out}", s.points.len())
            }
            _ => format!("verified {} points, report in {out}", cmd_verify(&ctx)?.points.len()),
        })
    })?
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
