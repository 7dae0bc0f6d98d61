//! Evaluation quantities: average regrets, final gaps, violations and
//! oscillation of the traced series.

use serde::{Deserialize, Serialize};

use crate::algorithms::{RegretSums, RunOutput, Trace};
use crate::cmdp::{evaluate_policy, Cmdp, Policy};
use crate::error::{Error, Result};
use crate::resilience::CostFunction;

/// Tail window used for the oscillation statistic when none is configured.
pub const DEFAULT_OSCILLATION_WINDOW: usize = 200;

/// Max-minus-min of each traced series over a tail window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oscillation {
    pub window: usize,
    pub xi: Vec<f64>,
    pub v_r: f64,
}

impl Oscillation {
    /// Largest oscillation over the relaxation coordinates.
    pub fn xi_max(&self) -> f64 {
        self.xi.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub algorithm: String,
    pub steps: usize,
    pub v_h_star: Option<f64>,
    pub regret_opt: Option<f64>,
    pub regret_vio: Option<f64>,
    pub final_v_r: f64,
    pub final_xi: Vec<f64>,
    pub final_lambda: Vec<f64>,
    /// `V_h* - (V_r^{pi_T} - h(xi_T))`.
    pub final_gap: Option<f64>,
    /// `[xi_{i,T} - V_{g_i}^{pi_T}]_+`.
    pub violations: Vec<f64>,
    /// `|xi_T - V_g^{pi_T}(rho)|_2`.
    pub tightness: f64,
    pub oscillation: Oscillation,
    /// Largest per-step movement of the reported iterate near the end.
    pub drift: f64,
}

/// `(R_opt, R_vio)` from an every-step trace; the records cover iterates
/// `0..=T` and the averages run over `0..T`.
pub fn compute_regrets(trace: &Trace, v_h_star: Option<f64>) -> Result<(f64, f64)> {
    let v_h_star =
        v_h_star.ok_or_else(|| Error::Config("regrets need the oracle value V_h*".into()))?;
    let records = &trace.records;
    if records.len() < 2 {
        return Err(Error::Config("regrets need at least one step".into()));
    }
    if records.iter().enumerate().any(|(k, r)| r.iter != k) {
        return Err(Error::Config(
            "regrets need a trace recorded at every step".into(),
        ));
    }
    let body = &records[..records.len() - 1];
    let t = body.len() as f64;
    let r_opt = body.iter().map(|r| v_h_star - (r.v_r - r.h)).sum::<f64>() / t;
    let r_vio = (0..trace.num_constraints)
        .map(|i| {
            let mean = body.iter().map(|r| r.xi[i] - r.v_g[i]).sum::<f64>() / t;
            mean.max(0.0)
        })
        .sum();
    Ok((r_opt, r_vio))
}

/// `R_vio` from running sums; `None` when no step was taken.
pub fn regret_vio_from_sums(sums: &RegretSums) -> Option<f64> {
    (sums.steps > 0).then(|| {
        let t = sums.steps as f64;
        sums.violation.iter().map(|s| (s / t).max(0.0)).sum()
    })
}

/// `R_opt` from running sums; `None` when no step was taken.
pub fn regret_opt_from_sums(sums: &RegretSums, v_h_star: f64) -> Option<f64> {
    (sums.steps > 0).then(|| v_h_star - sums.objective / sums.steps as f64)
}

/// Returns `([xi_i - V_{g_i}]_+, xi_i - V_{g_i})`.
pub fn compute_violations(
    model: &Cmdp,
    policy: &Policy,
    xi: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let vg = evaluate_policy(model, policy, None)?.v_utils_rho;
    if vg.len() != xi.len() {
        return Err(Error::Domain(
            "relaxation length differs from constraint count".into(),
        ));
    }
    let raw: Vec<f64> = xi.iter().zip(&vg).map(|(x, v)| x - v).collect();
    Ok((raw.iter().map(|d| d.max(0.0)).collect(), raw))
}

/// Max minus min of `xi_i` and `V_r` over the last `window` records (or the
/// whole trace when shorter).
pub fn oscillation_stat(trace: &Trace, window: usize) -> Oscillation {
    let start = trace.records.len().saturating_sub(window);
    let tail = &trace.records[start..];
    let spread = |it: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    };
    Oscillation {
        window,
        xi: (0..trace.num_constraints)
            .map(|i| spread(&mut tail.iter().map(|r| r.xi[i])))
            .collect(),
        v_r: spread(&mut tail.iter().map(|r| r.v_r)),
    }
}

impl MetricsReport {
    /// Summarizes a run. The final quantities refer to the reported iterate
    /// (the anchors for the optimistic solvers).
    pub fn from_run(
        model: &Cmdp,
        run: &RunOutput,
        cost: &dyn CostFunction,
        algorithm: &str,
        v_h_star: Option<f64>,
        window: usize,
    ) -> Result<Self> {
        let (policy, xi, lam) = run.final_iterate.reported();
        let eval = evaluate_policy(model, policy, None)?;
        let (violations, raw) = compute_violations(model, policy, xi)?;
        Ok(MetricsReport {
            algorithm: algorithm.to_string(),
            steps: run.sums.steps,
            v_h_star,
            regret_opt: v_h_star.and_then(|v| regret_opt_from_sums(&run.sums, v)),
            regret_vio: regret_vio_from_sums(&run.sums),
            final_v_r: eval.v_reward_rho,
            final_xi: xi.to_vec(),
            final_lambda: lam.to_vec(),
            final_gap: v_h_star.map(|v| v - (eval.v_reward_rho - cost.value(xi))),
            violations,
            tightness: raw.iter().map(|d| d * d).sum::<f64>().sqrt(),
            oscillation: oscillation_stat(&run.trace, window),
            drift: run.recent_drift,
        })
    }
}
