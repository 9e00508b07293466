mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "resonant", version, about = "Resonant semilinear equation solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Root directory for artifacts (report.json, trace.csv, …).
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    /// Seed for sampled checks and random starts; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct SolverFlags {
    /// Residual tolerance (relative to max(1, ‖h‖)).
    #[arg(long)]
    tol: Option<f64>,
    /// Newton iteration budget per solve.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Solver backend: newton or picard.
    #[arg(long)]
    backend: Option<String>,
    /// Start point: zero, random:SEED, or file:PATH.
    #[arg(long)]
    start: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the solvability hypotheses and emit a JSON report.
    Check {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Solve the ε-perturbed equation once.
    Solve {
        #[command(flatten)]
        common: CommonOpts,
        /// Perturbation parameter (must be > 0).
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Run the full ε → 0 continuation; writes trace CSV/JSON + solution.
    Continuation {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        solver: SolverFlags,
        /// Initial ε of the geometric schedule.
        #[arg(long)]
        eps0: Option<f64>,
        /// Geometric ratio of the schedule (0 < rho < 1).
        #[arg(long)]
        rho: Option<f64>,
        /// Last schedule index.
        #[arg(long)]
        kmax: Option<usize>,
        /// Norm blowup threshold (default 1e6·max(1, ‖h‖)).
        #[arg(long)]
        norm_cap: Option<f64>,
    },
    /// Run the config's sweep cases concurrently.
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Concurrent case limit (default: number of cases, capped by
        /// RESONANCE_SOLVER_THREADS).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the version string.
    Version,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Check { common } => run::check(&common),
        Command::Solve {
            common,
            eps,
            solver,
        } => run::solve(&common, eps, &solver),
        Command::Continuation {
            common,
            solver,
            eps0,
            rho,
            kmax,
            norm_cap,
        } => run::continuation(&common, &solver, eps0, rho, kmax, norm_cap),
        Command::Sweep { common, jobs } => run::sweep(&common, jobs),
        Command::Version => {
            println!("resonant {}", env!("CARGO_PKG_VERSION"));
            Ok(0)
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
