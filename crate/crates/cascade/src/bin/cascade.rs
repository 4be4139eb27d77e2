use std::path::PathBuf;
use std::process::ExitCode;

use cascade::cli::{execute, CommandKind, Invocation};
use clap::{Parser, Subcommand};

/// Cascade model simulation and verification suite.
#[derive(Parser)]
#[command(name = "cascade", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Path to the TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV/JSON results.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker thread count (0 or omitted: library default).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one shell trajectory; write trajectory.csv and summary.json.
    Simulate(Common),
    /// Run the analytic property suites (divergence, energy, interpolation).
    Verify(Common),
    /// Monte Carlo invariance test of the Gaussian measure (shell).
    Invariance(Common),
    /// Galerkin convergence study across truncation levels.
    Galerkin(Common),
    /// Uniform-in-level tail-quantile study.
    Tails(Common),
    /// Integrate one tree trajectory.
    TreeSimulate(Common),
    /// Monte Carlo invariance test for the tree model.
    TreeInvariance(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match cli.command {
        Command::Simulate(c) => (CommandKind::Simulate, c),
        Command::Verify(c) => (CommandKind::Verify, c),
        Command::Invariance(c) => (CommandKind::Invariance, c),
        Command::Galerkin(c) => (CommandKind::Galerkin, c),
        Command::Tails(c) => (CommandKind::Tails, c),
        Command::TreeSimulate(c) => (CommandKind::TreeSimulate, c),
        Command::TreeInvariance(c) => (CommandKind::TreeInvariance, c),
    };
    let code = execute(&Invocation {
        command: kind,
        config_path: common.config,
        seed: common.seed,
        out_dir: common.out,
        threads: common.threads,
    });
    ExitCode::from(code as u8)
}
