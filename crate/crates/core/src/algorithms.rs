//! Resilient primal-dual solvers.
//!
//! Both solvers search jointly over the policy `pi`, the relaxation `xi` and
//! the multipliers `lam` of the regularized Lagrangian
//! `L(pi, xi; lam) = V_{r + lam^T g}^pi(rho) - h(xi) - lam^T xi`.
//!
//! Every proximal update is implemented through its closed form: a quadratic
//! proximal term over a convex set turns each argmax/argmin into a Euclidean
//! projection of a gradient step.
//!
//! - policy: `project_simplex(pi(.|s) + eta Q_{r + lam^T g}(s, .))`
//! - relaxation: `project_box(xi + eta (-grad h(xi) - lam))`
//! - multipliers: `project_[0, cap](lam - eta (V_g(rho) - xi))`
//!
//! [`respgpd_step`] applies the three updates simultaneously from one iterate.
//! [`resopgpd_step`] keeps a second set of anchor iterates: the prediction
//! steps from the anchors with gradients taken at the previous prediction, and
//! the anchors then step from themselves with gradients taken at the new
//! prediction. In both solvers the multipliers grow on violated constraints.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cmdp::{evaluate_policy, project_simplex_in_place, Cmdp, Policy, ValueBundle};
use crate::error::{Error, Result};
use crate::resilience::{
    lagrangian_from_values, project_multiplier, project_relaxation, CostFunction, CostSpec,
    MultiplierDomain, Relaxation,
};
use crate::tolerances::DEFAULT_LAMBDA_CAP;

/// Number of trailing steps over which the iterate drift is tracked.
pub const DRIFT_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Projected policy-gradient primal-dual with relaxation update.
    Respgpd,
    /// Optimistic variant with anchor iterates.
    Resopgpd,
    /// Optimistic variant with the relaxation pinned at zero.
    Baseline,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Respgpd => "respgpd",
            Algorithm::Resopgpd => "resopgpd",
            Algorithm::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoConfig {
    pub algorithm: Algorithm,
    pub eta: f64,
    pub horizon: usize,
    pub lambda_cap: f64,
    pub cost: CostSpec,
    pub trace_every: usize,
    /// Reserved for randomized initializations; the standard initialization
    /// is deterministic.
    pub seed: u64,
}

impl AlgoConfig {
    pub fn new(algorithm: Algorithm, eta: f64, horizon: usize, alpha: f64) -> Self {
        Self {
            algorithm,
            eta,
            horizon,
            lambda_cap: DEFAULT_LAMBDA_CAP,
            cost: CostSpec::Quadratic { alpha },
            trace_every: 1,
            seed: 0,
        }
    }

    /// Step size `1 / sqrt(T)` used by the average-regret guarantee.
    pub fn regret_stepsize(horizon: usize) -> f64 {
        1.0 / (horizon.max(1) as f64).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!(
                "eta = {} must be positive",
                self.eta
            )));
        }
        if self.trace_every == 0 {
            return Err(Error::Config("trace_every must be at least 1".into()));
        }
        MultiplierDomain::new(self.lambda_cap)?;
        self.cost.build()?;
        Ok(())
    }
}

/// Anchor iterates of the optimistic solver.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchors {
    pub policy: Policy,
    pub xi: Relaxation,
    pub lam: Vec<f64>,
}

/// Primal-dual state `(pi, xi, lam)`; the optimistic solver also carries
/// anchors `(pi_hat, xi_hat, lam_hat)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResilientIterate {
    pub policy: Policy,
    pub xi: Relaxation,
    pub lam: Vec<f64>,
    pub anchors: Option<Anchors>,
}

impl ResilientIterate {
    /// Uniform policy, zero relaxation and zero multipliers.
    pub fn initial(model: &Cmdp, with_anchors: bool) -> Self {
        let m = model.num_constraints();
        let policy = Policy::uniform(model.num_states(), model.num_actions());
        let anchors = with_anchors.then(|| Anchors {
            policy: policy.clone(),
            xi: Relaxation::zeros(m),
            lam: vec![0.0; m],
        });
        Self {
            policy,
            xi: Relaxation::zeros(m),
            lam: vec![0.0; m],
            anchors,
        }
    }

    /// The iterate reported in traces: the anchors when present, otherwise the
    /// plain iterate.
    pub fn reported(&self) -> (&Policy, &Relaxation, &[f64]) {
        match &self.anchors {
            Some(a) => (&a.policy, &a.xi, &a.lam),
            None => (&self.policy, &self.xi, &self.lam),
        }
    }

    fn reported_is_plain(&self) -> bool {
        match &self.anchors {
            None => true,
            Some(a) => a.policy == self.policy && a.xi == self.xi && a.lam == self.lam,
        }
    }
}

fn policy_ascent(from: &Policy, q: &[f64], eta: f64) -> Policy {
    let mut next = from.clone();
    let na = from.num_actions();
    for s in 0..from.num_states() {
        let row = next.row_mut(s);
        for (a, p) in row.iter_mut().enumerate() {
            *p += eta * q[s * na + a];
        }
        project_simplex_in_place(row);
    }
    next
}

fn relaxation_ascent(
    from: &[f64],
    at_xi: &[f64],
    at_lam: &[f64],
    eta: f64,
    cost: &dyn CostFunction,
    gamma: f64,
) -> Relaxation {
    let grad = cost.gradient(at_xi);
    let moved: Vec<f64> = from
        .iter()
        .zip(grad.iter().zip(at_lam))
        .map(|(x, (g, l))| x + eta * (-g - l))
        .collect();
    project_relaxation(&moved, gamma)
}

fn multiplier_descent(
    from: &[f64],
    v_g: &[f64],
    at_xi: &[f64],
    eta: f64,
    domain: &MultiplierDomain,
) -> Vec<f64> {
    let moved: Vec<f64> = from
        .iter()
        .zip(v_g.iter().zip(at_xi))
        .map(|(l, (v, x))| l - eta * (v - x))
        .collect();
    project_multiplier(&moved, domain)
}

fn lagrangian_q(eval: &ValueBundle) -> &[f64] {
    &eval
        .scalarized
        .as_ref()
        .expect("evaluated with multipliers")
        .q
}

fn check_step_inputs(model: &Cmdp, state: &ResilientIterate, eta: f64) -> Result<()> {
    let m = model.num_constraints();
    if state.xi.len() != m || state.lam.len() != m {
        return Err(Error::Domain(
            "iterate dimensions do not match the model".into(),
        ));
    }
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::Domain(format!(
            "step size {eta} must be finite and >= 0"
        )));
    }
    Ok(())
}

fn respgpd_update(
    model: &Cmdp,
    cost: &dyn CostFunction,
    domain: &MultiplierDomain,
    state: &ResilientIterate,
    eta: f64,
    eval: &ValueBundle,
) -> ResilientIterate {
    ResilientIterate {
        policy: policy_ascent(&state.policy, lagrangian_q(eval), eta),
        xi: relaxation_ascent(&state.xi, &state.xi, &state.lam, eta, cost, model.gamma()),
        lam: multiplier_descent(&state.lam, &eval.v_utils_rho, &state.xi, eta, domain),
        anchors: None,
    }
}

/// One simultaneous projected primal-dual step. All three gradients are taken
/// at the incoming iterate.
pub fn respgpd_step(
    model: &Cmdp,
    cost: &dyn CostFunction,
    domain: &MultiplierDomain,
    state: &ResilientIterate,
    eta: f64,
) -> Result<ResilientIterate> {
    check_step_inputs(model, state, eta)?;
    let eval = evaluate_policy(model, &state.policy, Some(&state.lam))?;
    Ok(respgpd_update(model, cost, domain, state, eta, &eval))
}

/// Optimistic update given the evaluation of the incoming prediction. Returns
/// the new state and the evaluation of the new prediction.
fn resopgpd_update(
    model: &Cmdp,
    cost: &dyn CostFunction,
    domain: &MultiplierDomain,
    state: &ResilientIterate,
    eta: f64,
    eval_prev: &ValueBundle,
    update_relaxation: bool,
) -> Result<(ResilientIterate, ValueBundle)> {
    let anchors = state
        .anchors
        .as_ref()
        .ok_or_else(|| Error::Domain("optimistic step needs anchor iterates".into()))?;
    let gamma = model.gamma();

    let policy = policy_ascent(&anchors.policy, lagrangian_q(eval_prev), eta);
    let xi = if update_relaxation {
        relaxation_ascent(&anchors.xi, &state.xi, &state.lam, eta, cost, gamma)
    } else {
        anchors.xi.clone()
    };
    let lam = multiplier_descent(&anchors.lam, &eval_prev.v_utils_rho, &state.xi, eta, domain);

    let eval_new = evaluate_policy(model, &policy, Some(&lam))?;

    let hat_policy = policy_ascent(&anchors.policy, lagrangian_q(&eval_new), eta);
    let hat_xi = if update_relaxation {
        relaxation_ascent(&anchors.xi, &xi, &lam, eta, cost, gamma)
    } else {
        anchors.xi.clone()
    };
    let hat_lam = multiplier_descent(&anchors.lam, &eval_new.v_utils_rho, &xi, eta, domain);

    let next = ResilientIterate {
        policy,
        xi,
        lam,
        anchors: Some(Anchors {
            policy: hat_policy,
            xi: hat_xi,
            lam: hat_lam,
        }),
    };
    Ok((next, eval_new))
}

/// One optimistic primal-dual step. With `update_relaxation = false` the
/// relaxation coordinates of both iterate sets are left untouched, which is
/// the non-resilient baseline.
pub fn resopgpd_step(
    model: &Cmdp,
    cost: &dyn CostFunction,
    domain: &MultiplierDomain,
    state: &ResilientIterate,
    eta: f64,
    update_relaxation: bool,
) -> Result<ResilientIterate> {
    check_step_inputs(model, state, eta)?;
    let eval_prev = evaluate_policy(model, &state.policy, Some(&state.lam))?;
    resopgpd_update(
        model,
        cost,
        domain,
        state,
        eta,
        &eval_prev,
        update_relaxation,
    )
    .map(|(s, _)| s)
}

/// One traced iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub v_r: f64,
    pub v_g: Vec<f64>,
    pub xi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub h: f64,
    pub lagrangian: f64,
    /// `[xi_i - V_{g_i}(rho)]_+`.
    pub violation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub num_constraints: usize,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    /// Header `iter,v_r,v_g_1..m,xi_1..m,lambda_1..m,h,lagrangian,viol_1..m`.
    pub fn csv_header(m: usize) -> String {
        let mut cols = vec!["iter".to_string(), "v_r".to_string()];
        for prefix in ["v_g", "xi", "lambda"] {
            cols.extend((1..=m).map(|i| format!("{prefix}_{i}")));
        }
        cols.push("h".into());
        cols.push("lagrangian".into());
        cols.extend((1..=m).map(|i| format!("viol_{i}")));
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::csv_header(self.num_constraints);
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{},{}", r.iter, r.v_r);
            for series in [&r.v_g, &r.xi, &r.lambda] {
                for x in series.iter() {
                    let _ = write!(out, ",{x}");
                }
            }
            let _ = write!(out, ",{},{}", r.h, r.lagrangian);
            for x in &r.violation {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
        out
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

/// Running sums over iterates `0..T`, accumulated at every step regardless of
/// trace subsampling.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RegretSums {
    pub steps: usize,
    /// `sum_t (V_r^{pi_t}(rho) - h(xi_t))`.
    pub objective: f64,
    /// `sum_t (xi_{i,t} - V_{g_i}^{pi_t}(rho))` per constraint.
    pub violation: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub final_iterate: ResilientIterate,
    pub sums: RegretSums,
    /// Largest per-step movement of the reported iterate over the last
    /// [`DRIFT_WINDOW`] steps (sup-norm over policy, relaxation and
    /// multipliers). Zero when `T = 0`.
    pub recent_drift: f64,
}

fn record_from(
    iter: usize,
    eval: &ValueBundle,
    xi: &[f64],
    lam: &[f64],
    cost: &dyn CostFunction,
) -> TraceRecord {
    let scalar = eval
        .scalarized
        .as_ref()
        .expect("evaluated with multipliers")
        .v_rho;
    TraceRecord {
        iter,
        v_r: eval.v_reward_rho,
        v_g: eval.v_utils_rho.clone(),
        xi: xi.to_vec(),
        lambda: lam.to_vec(),
        h: cost.value(xi),
        lagrangian: lagrangian_from_values(scalar, xi, lam, cost),
        violation: xi
            .iter()
            .zip(&eval.v_utils_rho)
            .map(|(x, v)| (x - v).max(0.0))
            .collect(),
    }
}

fn movement(a: (&Policy, &Relaxation, &[f64]), b: (&Policy, &Relaxation, &[f64])) -> f64 {
    let sup = |x: &[f64], y: &[f64]| {
        x.iter()
            .zip(y)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    };
    a.0.max_abs_diff(b.0).max(sup(a.1, b.1)).max(sup(a.2, b.2))
}

/// Runs `T` steps of the configured solver from the standard initialization.
pub fn run_algorithm(model: &Cmdp, config: &AlgoConfig) -> Result<RunOutput> {
    config.validate()?;
    let cost = config.cost.build()?;
    let domain = MultiplierDomain::new(config.lambda_cap)?;
    let m = model.num_constraints();
    let optimistic = config.algorithm != Algorithm::Respgpd;
    let update_relaxation = config.algorithm != Algorithm::Baseline;

    let mut state = ResilientIterate::initial(model, optimistic);
    let mut eval_plain = evaluate_policy(model, &state.policy, Some(&state.lam))?;
    let mut trace = Trace {
        num_constraints: m,
        records: Vec::new(),
    };
    let mut sums = RegretSums {
        steps: 0,
        objective: 0.0,
        violation: vec![0.0; m],
    };
    let mut drifts: VecDeque<f64> = VecDeque::with_capacity(DRIFT_WINDOW);

    for k in 0..=config.horizon {
        let (policy, xi, lam) = state.reported();
        let eval_reported = if state.reported_is_plain() {
            None
        } else {
            Some(evaluate_policy(model, policy, Some(lam))?)
        };
        let eval = eval_reported.as_ref().unwrap_or(&eval_plain);

        if k < config.horizon {
            sums.steps += 1;
            sums.objective += eval.v_reward_rho - cost.value(xi);
            for (acc, (x, v)) in sums
                .violation
                .iter_mut()
                .zip(xi.iter().zip(&eval.v_utils_rho))
            {
                *acc += x - v;
            }
        }
        if k % config.trace_every == 0 || k == config.horizon {
            trace.records.push(record_from(k, eval, xi, lam, &cost));
        }
        if k == config.horizon {
            break;
        }

        let next = if optimistic {
            let (next, eval_next) = resopgpd_update(
                model,
                &cost,
                &domain,
                &state,
                config.eta,
                &eval_plain,
                update_relaxation,
            )?;
            eval_plain = eval_next;
            next
        } else {
            let next = respgpd_update(model, &cost, &domain, &state, config.eta, &eval_plain);
            eval_plain = evaluate_policy(model, &next.policy, Some(&next.lam))?;
            next
        };

        if drifts.len() == DRIFT_WINDOW {
            drifts.pop_front();
        }
        drifts.push_back(movement(state.reported(), next.reported()));
        state = next;
    }

    Ok(RunOutput {
        trace,
        final_iterate: state,
        sums,
        recent_drift: drifts.iter().copied().fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resilience::QuadraticCost;

    fn single_state_single_action() -> Cmdp {
        Cmdp::new(
            1,
            1,
            0.9,
            vec![1.0],
            vec![1.0],
            vec![1.0],
            vec![vec![1.0]],
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn relaxation_stays_at_zero_from_rest() {
        let model = single_state_single_action();
        let cost = QuadraticCost::new(1.0).unwrap();
        let mut state = ResilientIterate::initial(&model, false);
        // V_g = 9 > 0 keeps lam at 0, so xi never leaves 0.
        for _ in 0..5 {
            state = respgpd_step(&model, &cost, &MultiplierDomain::default(), &state, 0.3).unwrap();
            assert_eq!(state.xi.as_slice(), &[0.0]);
            assert_eq!(state.policy.probs(), &[1.0]);
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let model = single_state_single_action();
        let cost = QuadraticCost::new(1.0).unwrap();
        let state = ResilientIterate::initial(&model, true);
        let next = resopgpd_step(
            &model,
            &cost,
            &MultiplierDomain::default(),
            &state,
            0.0,
            true,
        )
        .unwrap();
        assert_eq!(next, state);
    }

    #[test]
    fn optimistic_step_requires_anchors() {
        let model = single_state_single_action();
        let cost = QuadraticCost::new(1.0).unwrap();
        let state = ResilientIterate::initial(&model, false);
        assert!(resopgpd_step(
            &model,
            &cost,
            &MultiplierDomain::default(),
            &state,
            0.1,
            true
        )
        .is_err());
    }

    #[test]
    fn zero_horizon_has_single_record() {
        let model = single_state_single_action();
        let out =
            run_algorithm(&model, &AlgoConfig::new(Algorithm::Resopgpd, 0.1, 0, 1.0)).unwrap();
        assert_eq!(out.trace.records.len(), 1);
        let r = &out.trace.records[0];
        assert_eq!(r.iter, 0);
        assert!((r.v_r - 10.0).abs() < 1e-10);
        assert_eq!(r.xi, vec![0.0]);
        assert_eq!(r.lambda, vec![0.0]);
        assert_eq!(out.sums.steps, 0);
    }

    #[test]
    fn trace_subsampling_keeps_final_record() {
        let model = single_state_single_action();
        let mut cfg = AlgoConfig::new(Algorithm::Respgpd, 0.1, 10, 1.0);
        cfg.trace_every = 4;
        let out = run_algorithm(&model, &cfg).unwrap();
        let iters: Vec<usize> = out.trace.records.iter().map(|r| r.iter).collect();
        assert_eq!(iters, vec![0, 4, 8, 10]);
        assert_eq!(out.sums.steps, 10);
    }

    #[test]
    fn config_validation() {
        let mut cfg = AlgoConfig::new(Algorithm::Respgpd, 0.0, 10, 1.0);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.eta = 0.1;
        cfg.trace_every = 0;
        assert!(cfg.validate().is_err());
        cfg.trace_every = 1;
        cfg.lambda_cap = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn csv_header_layout() {
        assert_eq!(
            Trace::csv_header(2),
            "iter,v_r,v_g_1,v_g_2,xi_1,xi_2,lambda_1,lambda_2,h,lagrangian,viol_1,viol_2"
        );
        assert_eq!(Trace::csv_header(0), "iter,v_r,h,lagrangian");
    }
}
