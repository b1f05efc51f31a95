use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hawkes_gen::cli_io::{load_scenario, parse_grid, run, Command, CurveSpec, RunOptions};
use hawkes_gen::error::Error;

#[derive(Parser)]
#[command(name = "hawkes-gen", version, about = "Hawkes processes with generation-dependent exciting functions")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Branching simulation; writes events.csv and summary.csv
    Simulate(Common),
    /// Limit constants m, σ² and generation rates
    Moments(Common),
    /// θ_c, Γ(θ) and the rate function I(x)
    Ldp(Common),
    /// Moderate deviation tail frequencies against J(x)
    MdpCheck(Common),
    /// Convergence-to-equilibrium bounds and Monte Carlo frequencies
    Equilibrium(Common),
    /// Signature plot and Epps curve, analytic and simulated
    Microstructure(Common),
    /// Lundberg exponent, heavy-tail asymptotes and simulated ruin curves
    Ruin(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML)
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte Carlo replications
    #[arg(long)]
    reps: Option<usize>,
    /// Output directory
    #[arg(long, env = "HAWKES_GEN_OUT")]
    out: Option<PathBuf>,
    /// Truncation tolerance for series and simulation
    #[arg(long)]
    tol: Option<f64>,
    /// Evaluate Γ(θ) at this point (ldp)
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Grid name:start:end:count, e.g. x:0.5:4:50
    #[arg(long, allow_hyphen_values = true)]
    curve: Option<String>,
    /// Comma-separated sampling scales τ (microstructure)
    #[arg(long)]
    tau_grid: Option<String>,
    /// Time horizon T; for ruin the finite-horizon parameter z
    #[arg(long)]
    horizon: Option<f64>,
}

fn execute(command: Command, c: Common) -> Result<(), Error> {
    let scenario = load_scenario(&c.scenario)?;
    for w in scenario.warnings() {
        eprintln!("warning: {w}");
    }
    let opts = RunOptions {
        seed: c.seed,
        reps: c.reps,
        out: c.out,
        tol: c.tol,
        theta: c.theta,
        curve: c.curve.as_deref().map(str::parse::<CurveSpec>).transpose()?,
        tau_grid: c.tau_grid.as_deref().map(parse_grid).transpose()?,
        horizon: c.horizon,
    };
    let report = run(command, &scenario, &opts)?;
    for (name, v) in &report.results {
        println!("{name} = {} ± {}", v.value, v.error);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Simulate(c) => (Command::Simulate, c),
        Sub::Moments(c) => (Command::Moments, c),
        Sub::Ldp(c) => (Command::Ldp, c),
        Sub::MdpCheck(c) => (Command::MdpCheck, c),
        Sub::Equilibrium(c) => (Command::Equilibrium, c),
        Sub::Microstructure(c) => (Command::Microstructure, c),
        Sub::Ruin(c) => (Command::Ruin, c),
    };
    match execute(command, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
