use std::path::{Path, PathBuf};

use serde::Deserialize;

use rescrl_core::algorithms::{run_algorithm, RunOutput};
use rescrl_core::config::{EnvSource, RunConfig};
use rescrl_core::envs::{EnvSpec, RandomCmdpSpec};
use rescrl_core::metrics::MetricsReport;
use rescrl_core::oracle::{solve_regularized, OracleOptions};
use rescrl_core::resilience::CostSpec;
use rescrl_core::tolerances::DEFAULT_LAMBDA_CAP;
use rescrl_core::{Cmdp, Error, Result};

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("malformed {what}: {e}")))
}

/// Metrics path beside a trace CSV: `runs/a.csv` -> `runs/a.metrics.json`.
pub fn metrics_path(trace: &Path) -> PathBuf {
    trace.with_extension("metrics.json")
}

pub fn gen_env(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut spec: EnvSpec = match config {
        Some(path) => read_json(path, "environment spec")?,
        None => EnvSpec::Random(RandomCmdpSpec::default()),
    };
    if let Some(seed) = seed {
        spec = spec.with_seed(seed);
    }
    let model = spec.build()?;
    write_file(out, &model.to_json()?)
}

/// Loads a run config with the command-line overrides applied.
pub fn load_run_config(
    path: &Path,
    seed: Option<u64>,
    trace_every: Option<usize>,
) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_path(path)?;
    if let Some(seed) = seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(k) = trace_every {
        if k == 0 {
            return Err(Error::Config("--trace-every must be at least 1".into()));
        }
        cfg.trace_every = k;
    }
    Ok(cfg)
}

/// `V_h*` from the config or, when requested, from the oracle.
fn oracle_value(model: &Cmdp, cfg: &RunConfig) -> Result<Option<f64>> {
    if cfg.v_h_star.is_some() || !cfg.oracle {
        return Ok(cfg.v_h_star);
    }
    let cost = cfg.cost.build()?;
    let options = OracleOptions {
        lambda_cap: cfg.lambda_cap,
        ..OracleOptions::default()
    };
    Ok(solve_regularized(model, &cost, &options)?.value())
}

/// Runs one config against a loaded model; returns the output and its metrics.
pub fn execute(model: &Cmdp, cfg: &RunConfig) -> Result<(RunOutput, MetricsReport)> {
    let algo = cfg.algo_config();
    let run = run_algorithm(model, &algo)?;
    let cost = cfg.cost.build()?;
    let v_h_star = oracle_value(model, cfg)?;
    let metrics = MetricsReport::from_run(
        model,
        &run,
        &cost,
        cfg.algorithm.name(),
        v_h_star,
        cfg.oscillation_window,
    )?;
    Ok((run, metrics))
}

pub fn write_outputs(out: &Path, run: &RunOutput, metrics: &MetricsReport) -> Result<()> {
    write_file(out, &run.trace.to_csv())?;
    write_file(
        &metrics_path(out),
        &(serde_json::to_string_pretty(metrics)? + "\n"),
    )
}

pub fn run(config: &Path, out: &Path, seed: Option<u64>, trace_every: Option<usize>) -> Result<()> {
    let cfg = load_run_config(config, seed, trace_every)?;
    let model = cfg.env.load()?;
    let (run, metrics) = execute(&model, &cfg)?;
    write_outputs(out, &run, &metrics)
}

fn default_resolution() -> usize {
    OracleOptions::default().grid_resolution
}

fn default_rounds() -> usize {
    OracleOptions::default().refine_rounds
}

fn default_cap() -> f64 {
    DEFAULT_LAMBDA_CAP
}

/// Oracle inputs; extra keys are ignored so run configs can be reused.
#[derive(Debug, Deserialize)]
struct OracleConfig {
    env: EnvSource,
    cost: CostSpec,
    #[serde(default = "default_resolution")]
    grid_resolution: usize,
    #[serde(default = "default_rounds")]
    refine_rounds: usize,
    #[serde(default = "default_cap")]
    lambda_cap: f64,
    /// Relaxation grid range; defaults to the full box.
    #[serde(default)]
    grid_lo: Option<f64>,
    #[serde(default)]
    grid_hi: Option<f64>,
}

pub fn oracle(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let mut cfg: OracleConfig = read_json(config, "oracle config")?;
    if let (Some(seed), EnvSource::Spec(spec)) = (seed, &cfg.env) {
        cfg.env = EnvSource::Spec(spec.clone().with_seed(seed));
    }
    if cfg.grid_resolution < 2 {
        return Err(Error::Config("grid_resolution must be at least 2".into()));
    }
    if !(cfg.lambda_cap > 0.0 && cfg.lambda_cap.is_finite()) {
        return Err(Error::Config("lambda_cap must be positive".into()));
    }
    let model = cfg.env.load()?;
    let cost = cfg.cost.build()?;
    let options = OracleOptions {
        grid_resolution: cfg.grid_resolution,
        refine_rounds: cfg.refine_rounds,
        lambda_cap: cfg.lambda_cap,
        refine_factor: OracleOptions::default().refine_factor,
        grid_lo: cfg.grid_lo,
        grid_hi: cfg.grid_hi,
    };
    let report = solve_regularized(&model, &cost, &options)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
