use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;

use rescrl_core::config::RunConfig;
use rescrl_core::metrics::MetricsReport;
use rescrl_core::{Error, Result};

use crate::commands::{execute, load_run_config, write_file, write_outputs};

pub struct SweepArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub param: String,
    pub values: String,
    pub seed: Option<u64>,
    pub trace_every: Option<usize>,
    pub jobs: Option<usize>,
}

/// Parses `a,b,c` or `lo:hi:log:n` (log-spaced, endpoints included).
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let bad = |msg: &str| Error::Config(format!("sweep values `{text}`: {msg}"));
    let values: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [lo, hi, "log", n] = parts.as_slice() else {
            return Err(bad("ranges have the form lo:hi:log:n"));
        };
        let lo: f64 = lo
            .trim()
            .parse()
            .map_err(|_| bad("lower end is not a number"))?;
        let hi: f64 = hi
            .trim()
            .parse()
            .map_err(|_| bad("upper end is not a number"))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| bad("count is not an integer"))?;
        if n < 2 {
            return Err(bad("ranges need at least two points"));
        }
        if !(lo > 0.0 && hi > 0.0) {
            return Err(bad("log ranges need positive ends"));
        }
        let (a, b) = (lo.ln(), hi.ln());
        (0..n)
            .map(|k| match k {
                0 => lo,
                k if k == n - 1 => hi,
                k => (a + (b - a) * k as f64 / (n - 1) as f64).exp(),
            })
            .collect()
    } else {
        text.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| bad("not a number list"))
            })
            .collect::<Result<_>>()?
    };
    if values.is_empty() {
        return Err(bad("no values"));
    }
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(bad("values must be positive"));
    }
    Ok(values)
}

fn apply(base: &RunConfig, param: &str, value: f64) -> Result<RunConfig> {
    let mut cfg = base.clone();
    match param {
        "alpha" => cfg.cost = cfg.cost.with_alpha(value),
        "eta" => cfg.eta = value,
        "T" => {
            if value.fract() != 0.0 {
                return Err(Error::Config(format!("T = {value} is not an integer")));
            }
            cfg.horizon = value as usize;
        }
        other => return Err(Error::Config(format!("unknown sweep parameter {other}"))),
    }
    cfg.algo_config().validate()?;
    Ok(cfg)
}

/// Worker count: the flag, then `RESCRL_JOBS`, then the core count.
pub fn job_count(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return if n == 0 {
            Err(Error::Config("--jobs must be at least 1".into()))
        } else {
            Ok(n)
        };
    }
    match std::env::var("RESCRL_JOBS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!(
                "RESCRL_JOBS = {v:?} is not a positive integer"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn summary_header(param: &str, m: usize) -> String {
    let mut h = format!("index,{param},status,final_v_r,final_gap");
    for i in 1..=m {
        write!(h, ",final_xi_{i}").unwrap();
    }
    for i in 1..=m {
        write!(h, ",osc_xi_{i}").unwrap();
    }
    h.push_str(",osc_v_r,trace,message");
    h
}

fn summary_row(
    index: usize,
    value: f64,
    m: usize,
    trace: &str,
    result: &Result<MetricsReport>,
) -> String {
    match result {
        Ok(r) => {
            let mut row = format!(
                "{index},{value},ok,{},{}",
                r.final_v_r,
                fmt_opt(r.final_gap)
            );
            for x in &r.final_xi {
                write!(row, ",{x}").unwrap();
            }
            for x in &r.oscillation.xi {
                write!(row, ",{x}").unwrap();
            }
            write!(row, ",{},{trace},", r.oscillation.v_r).unwrap();
            row
        }
        Err(e) => {
            let blanks = ",".repeat(2 * m + 3);
            let msg = e.to_string().replace(['"', '\n'], " ");
            format!("{index},{value},error{blanks},{trace},\"{msg}\"")
        }
    }
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let values = parse_values(&args.values)?;
    let base = load_run_config(&args.config, args.seed, args.trace_every)?;
    let model = base.env.load()?;
    let m = model.num_constraints();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(job_count(args.jobs)?)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let results: Vec<(String, Result<MetricsReport>)> = pool.install(|| {
        values
            .par_iter()
            .enumerate()
            .map(|(k, &value)| {
                let name = format!("run_{k:03}.csv");
                let result = apply(&base, &args.param, value).and_then(|cfg| {
                    let (run, metrics) = execute(&model, &cfg)?;
                    write_outputs(&args.out.join(&name), &run, &metrics)?;
                    Ok(metrics)
                });
                (name, result)
            })
            .collect()
    });

    let mut summary = summary_header(&args.param, m);
    summary.push('\n');
    for (k, ((name, result), value)) in results.iter().zip(&values).enumerate() {
        summary.push_str(&summary_row(k, *value, m, name, result));
        summary.push('\n');
    }
    write_file(&args.out.join("summary.csv"), &summary)?;
    for (name, result) in &results {
        if let Err(e) = result {
            eprintln!("warning: {name} failed: {e}");
        }
    }
    Ok(())
}
