//! `rescrl`: environment generation, single runs, parameter sweeps and oracle
//! reports for resilient constrained MDP solvers.

mod commands;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "rescrl",
    version,
    about = "Resilient constrained MDP experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build an environment from a spec and write the environment JSON.
    GenEnv {
        /// Environment spec JSON (`{"kind": "random" | "monitor3" | "grid_monitor", ...}`).
        /// Defaults to the 20-state, 5-action random CMDP.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Seed for random environments.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one solver and write the trace CSV and metrics JSON.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Trace CSV path; metrics go to `<stem>.metrics.json` beside it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trace_every: Option<usize>,
    },
    /// Run a base config over a list of parameter values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for per-value traces and `summary.csv`.
        #[arg(long)]
        out: PathBuf,
        /// Relaxation-cost weights: `a,b,c` or `lo:hi:log:n`.
        #[arg(long, conflicts_with_all = ["param", "values"])]
        alphas: Option<String>,
        /// Swept parameter.
        #[arg(long, value_parser = ["alpha", "eta", "T"], requires = "values")]
        param: Option<String>,
        /// Values of `--param`: `a,b,c` or `lo:hi:log:n`.
        #[arg(long, requires = "param")]
        values: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trace_every: Option<usize>,
        /// Parallel runs; `RESCRL_JOBS` applies when absent, then the core count.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Compute the regularized optimum on the primal and dual routes.
    Oracle {
        /// JSON with `env` and `cost` (a run config works) and optional
        /// `grid_resolution`, `refine_rounds`, `lambda_cap`, `grid_lo`, `grid_hi`.
        #[arg(long)]
        config: PathBuf,
        /// Report path; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenEnv { config, out, seed } => commands::gen_env(config.as_deref(), &out, seed),
        Command::Run {
            config,
            out,
            seed,
            trace_every,
        } => commands::run(&config, &out, seed, trace_every),
        Command::Sweep {
            config,
            out,
            alphas,
            param,
            values,
            seed,
            trace_every,
            jobs,
        } => {
            let (param, values) = match (alphas, param, values) {
                (Some(a), _, _) => ("alpha".to_string(), a),
                (None, Some(p), Some(v)) => (p, v),
                _ => ("alpha".to_string(), String::new()),
            };
            sweep::sweep(&sweep::SweepArgs {
                config,
                out,
                param,
                values,
                seed,
                trace_every,
                jobs,
            })
        }
        Command::Oracle { config, out, seed } => commands::oracle(&config, out.as_deref(), seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
