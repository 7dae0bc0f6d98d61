//! Ground-truth machinery used to score the solvers.
//!
//! Two independent routes compute the same optima:
//!
//! - the primal route solves the occupancy-measure linear program with a
//!   dense two-phase simplex, giving `V*(xi)` directly;
//! - the dual route solves unconstrained MDPs with reward `r + lam^T g` by
//!   value iteration and minimizes the resulting dual function over `lam`.
//!
//! The regularized optimum `V_h* = max_xi { V*(xi) - h(xi) }` is computed on
//! both routes and the report carries the agreement status.

pub mod search;
pub mod simplex;

use serde::{Deserialize, Serialize};

use crate::cmdp::{
    argmax_lowest, evaluate_cost, evaluate_policy, greedy_policy, q_from_v, Cmdp, Policy,
};
use crate::error::{Error, Result};
use crate::resilience::CostFunction;
use crate::tolerances::{
    DEFAULT_LAMBDA_CAP, DEGENERATE_ROW_MASS, DUALITY_AGREEMENT, DUALITY_FAILURE, LP_RECOVERY,
    VALUE_ITERATION_RESIDUAL,
};
use search::{golden_section, nested_golden, projected_subgradient};
use simplex::{LpOutcome, StandardLp};

/// Largest multiplier cap tried when the dual minimizer sits on the cap.
const MAX_DUAL_CAP: f64 = 1e6;
/// Interval width at which golden-section search stops.
const GOLDEN_WIDTH: f64 = 1e-8;

/// Optimal value and a deterministic optimal policy of an unconstrained MDP.
#[derive(Debug, Clone)]
pub struct MdpSolution {
    /// Exact value of `policy` at `rho`.
    pub value: f64,
    pub policy: Policy,
    pub v: Vec<f64>,
}

/// Solves the unconstrained MDP with the given per-(s,a) reward table: value
/// iteration to a Bellman residual of `1e-10` (relative to the reward scale),
/// greedy extraction, then policy-improvement sweeps on exact evaluations
/// until the greedy policy is stable.
pub fn solve_mdp_with_reward(model: &Cmdp, reward: &[f64]) -> Result<MdpSolution> {
    let (ns, na) = (model.num_states(), model.num_actions());
    if reward.len() != ns * na {
        return Err(Error::Domain("reward table has the wrong size".into()));
    }
    let scale = reward.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let tol = VALUE_ITERATION_RESIDUAL * scale;
    let mut v = vec![0.0; ns];
    let max_sweeps = 100_000;
    for sweep in 0.. {
        let q = q_from_v(model, reward, &v);
        let mut residual = 0.0_f64;
        for (s, vs) in v.iter_mut().enumerate() {
            let best = q[s * na..(s + 1) * na]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            residual = residual.max((best - *vs).abs());
            *vs = best;
        }
        if residual <= tol {
            break;
        }
        if sweep >= max_sweeps {
            return Err(Error::Numerical("value iteration did not converge".into()));
        }
    }

    let mut actions: Vec<usize> = {
        let q = q_from_v(model, reward, &v);
        (0..ns)
            .map(|s| argmax_lowest(&q[s * na..(s + 1) * na]))
            .collect()
    };
    let improve_tol = 1e-12 * scale / (1.0 - model.gamma());
    for _ in 0..1000 {
        let policy = Policy::deterministic(na, &actions);
        let (v_exact, q) = evaluate_cost(model, &policy, reward)?;
        let mut changed = false;
        for s in 0..ns {
            let row = &q[s * na..(s + 1) * na];
            let best = argmax_lowest(row);
            if row[best] > row[actions[s]] + improve_tol {
                actions[s] = best;
                changed = true;
            }
        }
        if !changed {
            let value = model.rho().iter().zip(&v_exact).map(|(p, x)| p * x).sum();
            return Ok(MdpSolution {
                value,
                policy,
                v: v_exact,
            });
        }
    }
    Err(Error::Numerical(
        "policy improvement did not stabilize".into(),
    ))
}

/// `D(lam) = max_pi V_{r + lam^T g}^pi(rho)` with its maximizing policy.
pub fn solve_scalarized_mdp(model: &Cmdp, lam: &[f64]) -> Result<MdpSolution> {
    check_multipliers(model, lam)?;
    solve_mdp_with_reward(model, &model.scalarized_reward(lam))
}

fn check_multipliers(model: &Cmdp, lam: &[f64]) -> Result<()> {
    if lam.len() != model.num_constraints() {
        return Err(Error::Domain(format!(
            "{} multipliers for {} constraints",
            lam.len(),
            model.num_constraints()
        )));
    }
    if lam.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
        return Err(Error::Domain(
            "multipliers must be finite and nonnegative".into(),
        ));
    }
    Ok(())
}

fn check_relaxation(model: &Cmdp, xi: &[f64]) -> Result<()> {
    if xi.len() != model.num_constraints() {
        return Err(Error::Domain(
            "relaxation length differs from constraint count".into(),
        ));
    }
    let bound = model.value_bound() * (1.0 + 1e-12);
    if xi.iter().any(|x| !(x.abs() <= bound)) {
        return Err(Error::Domain(format!(
            "relaxation {xi:?} leaves the box [-{bound}, {bound}]"
        )));
    }
    Ok(())
}

/// Feasibility of a linear program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

/// Solution of the occupancy-measure program at one relaxation.
#[derive(Debug, Clone)]
pub struct OccupancySolution {
    pub status: LpStatus,
    /// `V*(xi)`; `None` when infeasible.
    pub value: Option<f64>,
    /// Normalized occupancy `q(s,a)`, summing to one.
    pub occupancy: Option<Vec<f64>>,
    pub policy: Option<Policy>,
}

/// Occupancy LP in equality form. Columns are `q(s,a)` followed by one
/// surplus column per constraint:
///
/// ```text
/// max  <r, q> / (1 - gamma)
/// s.t. sum_a q(s',a) - gamma sum_{s,a} P(s'|s,a) q(s,a) = (1 - gamma) rho(s')
///      <g_i, q> - surplus_i = (1 - gamma) xi_i
///      q, surplus >= 0
/// ```
fn occupancy_lp(model: &Cmdp, xi: &[f64]) -> StandardLp {
    let (ns, na, m) = (
        model.num_states(),
        model.num_actions(),
        model.num_constraints(),
    );
    let gamma = model.gamma();
    let n = ns * na + m;
    let mut rows = Vec::with_capacity(ns + m);
    let mut rhs = Vec::with_capacity(ns + m);
    for next in 0..ns {
        let mut row = vec![0.0; n];
        for a in 0..na {
            row[next * na + a] += 1.0;
        }
        for s in 0..ns {
            for a in 0..na {
                row[s * na + a] -= gamma * model.transition_row(s, a)[next];
            }
        }
        rows.push(row);
        rhs.push((1.0 - gamma) * model.rho()[next]);
    }
    for (i, g) in model.translated().iter().enumerate() {
        let mut row = vec![0.0; n];
        row[..ns * na].copy_from_slice(g);
        row[ns * na + i] = -1.0;
        rows.push(row);
        rhs.push((1.0 - gamma) * xi[i]);
    }
    let mut objective: Vec<f64> = model.reward().to_vec();
    objective.extend(std::iter::repeat_n(0.0, m));
    StandardLp {
        rows,
        rhs,
        objective,
    }
}

/// Policy induced by an occupancy measure; rows without mass are uniform.
pub fn policy_from_occupancy(num_states: usize, num_actions: usize, q: &[f64]) -> Policy {
    let mut probs = Vec::with_capacity(num_states * num_actions);
    for s in 0..num_states {
        let row = &q[s * num_actions..(s + 1) * num_actions];
        let mass: f64 = row.iter().sum();
        if mass < DEGENERATE_ROW_MASS {
            probs.extend(std::iter::repeat_n(1.0 / num_actions as f64, num_actions));
        } else {
            probs.extend(row.iter().map(|x| x / mass));
        }
    }
    Policy::from_flat(num_states, num_actions, probs).expect("rows normalized")
}

/// `V*(xi)` by the occupancy-measure LP. The recovered policy is re-evaluated
/// exactly and must reproduce the LP value and satisfy the relaxed
/// constraints.
pub fn solve_occupancy_lp(model: &Cmdp, xi: &[f64]) -> Result<OccupancySolution> {
    check_relaxation(model, xi)?;
    let (ns, na) = (model.num_states(), model.num_actions());
    let lp = occupancy_lp(model, xi);
    match simplex::solve(&lp)? {
        LpOutcome::Infeasible { .. } => Ok(OccupancySolution {
            status: LpStatus::Infeasible,
            value: None,
            occupancy: None,
            policy: None,
        }),
        LpOutcome::Unbounded => Err(Error::Numerical(
            "occupancy LP reported unbounded on a bounded polytope".into(),
        )),
        LpOutcome::Optimal { x, objective } => {
            let value = objective / (1.0 - model.gamma());
            let q = x[..ns * na].to_vec();
            let policy = policy_from_occupancy(ns, na, &q);
            let vb = evaluate_policy(model, &policy, None)?;
            if (vb.v_reward_rho - value).abs() > LP_RECOVERY {
                return Err(Error::Numerical(format!(
                    "recovered policy value {} differs from LP value {value} at xi = {xi:?}",
                    vb.v_reward_rho
                )));
            }
            for (i, (v, x)) in vb.v_utils_rho.iter().zip(xi).enumerate() {
                if *v < x - LP_RECOVERY {
                    return Err(Error::Numerical(format!(
                        "recovered policy violates constraint {i}: V_g = {v} < xi = {x}"
                    )));
                }
            }
            Ok(OccupancySolution {
                status: LpStatus::Optimal,
                value: Some(value),
                occupancy: Some(q),
                policy: Some(policy),
            })
        }
    }
}

/// `V*(xi)` at every grid point; `None` marks an infeasible relaxation.
pub fn primal_value_map(model: &Cmdp, xi_grid: &[Vec<f64>]) -> Result<Vec<Option<f64>>> {
    xi_grid
        .iter()
        .map(|xi| Ok(solve_occupancy_lp(model, xi)?.value))
        .collect()
}

/// `n` evenly spaced points on `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Regularized dual `D_h(lam) = D(lam) + max_xi { -h(xi) - lam^T xi }`.
pub fn dual_regularized(model: &Cmdp, cost: &dyn CostFunction, lam: &[f64]) -> Result<f64> {
    Ok(dual_regularized_parts(model, cost, lam)?.0)
}

/// Returns `(D_h(lam), subgradient V_g^{pi_lam}(rho) - xi_lam)`.
fn dual_regularized_parts(
    model: &Cmdp,
    cost: &dyn CostFunction,
    lam: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let sol = solve_scalarized_mdp(model, lam)?;
    let xi = cost.relaxation_response(lam, model.value_bound());
    let conj = -cost.value(&xi) - lam.iter().zip(&xi).map(|(l, x)| l * x).sum::<f64>();
    let vg = evaluate_policy(model, &sol.policy, None)?.v_utils_rho;
    let sub = vg.iter().zip(&xi).map(|(v, x)| v - x).collect();
    Ok((sol.value + conj, sub))
}

/// Whether the dual minimum was attained inside the multiplier box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualStatus {
    Attained,
    /// The minimizer sits on the cap with a descent direction beyond it.
    CapBound,
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub value: f64,
    pub lambda: Vec<f64>,
    pub status: DualStatus,
    pub cap: f64,
}

/// Minimizes a convex function over `[0, cap]^m` given value and subgradient.
fn minimize_over_box<F>(mut f: F, m: usize, cap: f64) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    match m {
        0 => Ok((vec![], f(&[])?.0)),
        1 => {
            let (x, v) = golden_section(|x| Ok(f(&[x])?.0), 0.0, cap, GOLDEN_WIDTH)?;
            Ok((vec![x], v))
        }
        2 => {
            let (x, v) = nested_golden(|a, b| Ok(f(&[a, b])?.0), cap, GOLDEN_WIDTH)?;
            Ok((x.to_vec(), v))
        }
        _ => projected_subgradient(f, m, cap, 4000, cap / 20.0),
    }
}

/// Whether some coordinate sits at the cap with a negative subgradient.
fn presses_cap(lam: &[f64], sub: &[f64], cap: f64) -> bool {
    lam.iter()
        .zip(sub)
        .any(|(l, g)| *l >= cap * (1.0 - 1e-9) && *g < 0.0)
}

/// Minimizes `D(lam) - lam^T xi` over `lam >= 0`. The cap starts at
/// `cap` and grows tenfold while the minimizer presses against it, up to
/// `1e6`; a minimizer still on the cap then signals an infeasible `xi`.
pub fn minimize_perturbed_dual(model: &Cmdp, xi: &[f64], cap: f64) -> Result<DualSolution> {
    check_relaxation(model, xi)?;
    let m = model.num_constraints();
    let objective = |lam: &[f64]| -> Result<(f64, Vec<f64>)> {
        let sol = solve_scalarized_mdp(model, lam)?;
        let vg = evaluate_policy(model, &sol.policy, None)?.v_utils_rho;
        let value = sol.value - lam.iter().zip(xi).map(|(l, x)| l * x).sum::<f64>();
        Ok((value, vg.iter().zip(xi).map(|(v, x)| v - x).collect()))
    };
    let mut cap = cap;
    loop {
        let (lambda, value) = minimize_over_box(objective, m, cap)?;
        let (_, sub) = objective(&lambda)?;
        if !presses_cap(&lambda, &sub, cap) {
            return Ok(DualSolution {
                value,
                lambda,
                status: DualStatus::Attained,
                cap,
            });
        }
        if cap >= MAX_DUAL_CAP {
            return Ok(DualSolution {
                value,
                lambda,
                status: DualStatus::CapBound,
                cap,
            });
        }
        cap = (cap * 10.0).min(MAX_DUAL_CAP);
    }
}

/// Minimizes `D_h(lam)` over `[0, cap]^m`.
pub fn minimize_regularized_dual(
    model: &Cmdp,
    cost: &dyn CostFunction,
    cap: f64,
) -> Result<DualSolution> {
    let m = model.num_constraints();
    let objective = |lam: &[f64]| dual_regularized_parts(model, cost, lam);
    let (lambda, value) = minimize_over_box(objective, m, cap)?;
    let (_, sub) = objective(&lambda)?;
    let status = if presses_cap(&lambda, &sub, cap) {
        DualStatus::CapBound
    } else {
        DualStatus::Attained
    };
    Ok(DualSolution {
        value,
        lambda,
        status,
        cap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleStatus {
    /// Primal and dual routes agree within `1e-3`.
    Optimal,
    /// Routes agree within `1e-2` but not `1e-3`.
    Approximate,
    /// No grid relaxation is feasible.
    Infeasible,
    /// The dual minimizer presses against the multiplier cap.
    UnboundedDualCap,
    /// More than two constraints: only the dual route was run.
    DualOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Points per coordinate of the initial relaxation grid.
    pub grid_resolution: usize,
    /// Grid-shrinking rounds after the initial grid.
    pub refine_rounds: usize,
    /// Spacing reduction per round.
    pub refine_factor: usize,
    pub lambda_cap: f64,
    /// Grid range; defaults to the full relaxation box.
    pub grid_lo: Option<f64>,
    pub grid_hi: Option<f64>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            grid_resolution: 21,
            refine_rounds: 6,
            refine_factor: 5,
            lambda_cap: DEFAULT_LAMBDA_CAP,
            grid_lo: None,
            grid_hi: None,
        }
    }
}

/// Regularized optimum computed on both routes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReport {
    /// `max_xi { V*(xi) - h(xi) }` on the relaxation grid.
    pub primal_value: Option<f64>,
    /// `min_lam D_h(lam)`.
    pub dual_value: Option<f64>,
    pub xi_star: Vec<f64>,
    pub lambda_star: Vec<f64>,
    pub status: OracleStatus,
    pub grid_resolution: usize,
    /// Policy recovered from the LP at `xi_star`. Values are certified; the
    /// dual-route greedy policy may be infeasible when the optimum mixes.
    #[serde(skip)]
    pub policy: Option<Policy>,
}

impl OracleReport {
    /// The certified regularized optimum `V_h*`.
    pub fn value(&self) -> Option<f64> {
        self.primal_value.or(self.dual_value)
    }
}

fn grid_axis(center: f64, step: f64, half: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = (-(half as i64)..=half as i64)
        .map(|k| (center + k as f64 * step).clamp(lo, hi))
        .collect();
    pts.dedup();
    pts
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![vec![]], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect()
    })
}

/// Grid maximization of `V*(xi) - h(xi)` with local grid shrinking. Returns
/// `(xi, value, policy)` or `None` when no grid point is feasible.
fn primal_grid_search(
    model: &Cmdp,
    cost: &dyn CostFunction,
    options: &OracleOptions,
) -> Result<Option<(Vec<f64>, f64, Policy)>> {
    let m = model.num_constraints();
    let bound = model.value_bound();
    let lo = options.grid_lo.unwrap_or(-bound).max(-bound);
    let hi = options.grid_hi.unwrap_or(bound).min(bound);
    if !(lo <= hi) {
        return Err(Error::Config(format!("empty relaxation grid [{lo}, {hi}]")));
    }
    let n = options.grid_resolution.max(2);
    let mut best: Option<(Vec<f64>, f64, Policy)> = None;

    let consider =
        |points: Vec<Vec<f64>>, best: &mut Option<(Vec<f64>, f64, Policy)>| -> Result<()> {
            for xi in points {
                let sol = solve_occupancy_lp(model, &xi)?;
                if let (Some(v), Some(pi)) = (sol.value, sol.policy) {
                    let obj = v - cost.value(&xi);
                    if best.as_ref().is_none_or(|b| obj > b.1) {
                        *best = Some((xi, obj, pi));
                    }
                }
            }
            Ok(())
        };

    let axis = linspace(lo, hi, n);
    consider(cartesian(&vec![axis; m]), &mut best)?;
    let mut step = (hi - lo) / (n - 1) as f64;
    let factor = options.refine_factor.max(2);
    for _ in 0..options.refine_rounds {
        let Some((center, _, _)) = best.clone() else {
            break;
        };
        step /= factor as f64;
        let axes: Vec<Vec<f64>> = center
            .iter()
            .map(|&c| grid_axis(c, step, 2 * factor, lo, hi))
            .collect();
        consider(cartesian(&axes), &mut best)?;
    }
    Ok(best)
}

/// Computes `V_h*` by the primal grid route (`m <= 2`) and the dual route,
/// and classifies their agreement.
pub fn solve_regularized(
    model: &Cmdp,
    cost: &dyn CostFunction,
    options: &OracleOptions,
) -> Result<OracleReport> {
    let m = model.num_constraints();
    let dual = minimize_regularized_dual(model, cost, options.lambda_cap)?;

    if m == 0 {
        let sol = solve_scalarized_mdp(model, &[])?;
        return Ok(OracleReport {
            primal_value: Some(sol.value),
            dual_value: Some(dual.value),
            xi_star: vec![],
            lambda_star: vec![],
            status: OracleStatus::Optimal,
            grid_resolution: options.grid_resolution,
            policy: Some(sol.policy),
        });
    }
    if m > 2 {
        return Ok(OracleReport {
            primal_value: None,
            dual_value: Some(dual.value),
            xi_star: cost.relaxation_response(&dual.lambda, model.value_bound()),
            lambda_star: dual.lambda,
            status: match dual.status {
                DualStatus::Attained => OracleStatus::DualOnly,
                DualStatus::CapBound => OracleStatus::UnboundedDualCap,
            },
            grid_resolution: options.grid_resolution,
            policy: None,
        });
    }

    let Some((xi_star, primal, policy)) = primal_grid_search(model, cost, options)? else {
        return Ok(OracleReport {
            primal_value: None,
            dual_value: Some(dual.value),
            xi_star: vec![],
            lambda_star: dual.lambda,
            status: OracleStatus::Infeasible,
            grid_resolution: options.grid_resolution,
            policy: None,
        });
    };
    let gap = (primal - dual.value).abs();
    let status = if dual.status == DualStatus::CapBound {
        OracleStatus::UnboundedDualCap
    } else if gap <= DUALITY_AGREEMENT {
        OracleStatus::Optimal
    } else if gap <= DUALITY_FAILURE {
        OracleStatus::Approximate
    } else {
        return Err(Error::Diagnostics(format!(
            "primal grid value {primal} and dual value {} differ by {gap:e}; \
             refine the grid or raise the multiplier cap",
            dual.value
        )));
    };
    Ok(OracleReport {
        primal_value: Some(primal),
        dual_value: Some(dual.value),
        xi_star,
        lambda_star: dual.lambda,
        status,
        grid_resolution: options.grid_resolution,
        policy: Some(policy),
    })
}

/// Finite-difference certificate of a resilient equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResidual {
    /// Finite-difference slope of `V*` per coordinate.
    pub slopes: Vec<f64>,
    /// `slope_i - d h / d xi_i`.
    pub residual: Vec<f64>,
    /// Coordinates where one perturbation was infeasible.
    pub one_sided: Vec<bool>,
}

impl EquilibriumResidual {
    pub fn inf_norm(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Central difference of `V*` at `xi` with step `delta`, minus `grad h(xi)`.
/// A small residual certifies numerically that `grad h(xi)` is a supergradient
/// of `V*` at `xi`.
pub fn equilibrium_residual(
    model: &Cmdp,
    cost: &dyn CostFunction,
    xi: &[f64],
    delta: f64,
) -> Result<EquilibriumResidual> {
    if !(delta > 0.0) {
        return Err(Error::Domain(
            "finite-difference step must be positive".into(),
        ));
    }
    let center = solve_occupancy_lp(model, xi)?
        .value
        .ok_or_else(|| Error::Domain(format!("relaxation {xi:?} is infeasible")))?;
    let grad = cost.gradient(xi);
    let bound = model.value_bound();
    let mut out = EquilibriumResidual {
        slopes: vec![],
        residual: vec![],
        one_sided: vec![],
    };
    for i in 0..xi.len() {
        let shifted = |d: f64| -> Result<Option<f64>> {
            let mut p = xi.to_vec();
            p[i] += d;
            if p[i].abs() > bound {
                return Ok(None);
            }
            Ok(solve_occupancy_lp(model, &p)?.value)
        };
        let (plus, minus) = (shifted(delta)?, shifted(-delta)?);
        let (slope, one_sided) = match (plus, minus) {
            (Some(p), Some(mi)) => ((p - mi) / (2.0 * delta), false),
            (Some(p), None) => ((p - center) / delta, true),
            (None, Some(mi)) => ((center - mi) / delta, true),
            (None, None) => {
                return Err(Error::Domain(format!(
                    "both perturbations of coordinate {i} are infeasible"
                )))
            }
        };
        out.slopes.push(slope);
        out.residual.push(slope - grad[i]);
        out.one_sided.push(one_sided);
    }
    Ok(out)
}

/// Greedy policy for a per-(s,a) table, re-exported for oracle users.
pub fn greedy(model: &Cmdp, q: &[f64]) -> Policy {
    greedy_policy(model.num_states(), model.num_actions(), q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::gen_random_cmdp;
    use crate::resilience::QuadraticCost;

    fn single_state(u: f64, b: f64) -> Cmdp {
        Cmdp::new(
            1,
            1,
            0.9,
            vec![1.0],
            vec![1.0],
            vec![1.0],
            vec![vec![u]],
            vec![b],
        )
        .unwrap()
    }

    #[test]
    fn scalarized_single_state() {
        let m = Cmdp::new(1, 1, 0.9, vec![1.0], vec![1.0], vec![1.0], vec![], vec![]).unwrap();
        let sol = solve_scalarized_mdp(&m, &[]).unwrap();
        assert!((sol.value - 10.0).abs() < 1e-9);
    }

    #[test]
    fn scalarized_matches_enumeration_on_2x2() {
        for seed in 0..10 {
            let m = gen_random_cmdp(seed, 2, 2, 0, 0.9).unwrap();
            let mut best = f64::NEG_INFINITY;
            for a0 in 0..2 {
                for a1 in 0..2 {
                    let pi = Policy::deterministic(2, &[a0, a1]);
                    best = best.max(evaluate_policy(&m, &pi, None).unwrap().v_reward_rho);
                }
            }
            let sol = solve_scalarized_mdp(&m, &[]).unwrap();
            assert!((sol.value - best).abs() < 1e-10, "seed {seed}");
            let exact = evaluate_policy(&m, &sol.policy, None).unwrap().v_reward_rho;
            assert!((exact - sol.value).abs() < 1e-8);
        }
    }

    #[test]
    fn lp_without_constraints_matches_value_iteration() {
        for seed in 0..5 {
            let m = gen_random_cmdp(seed, 5, 3, 0, 0.9).unwrap();
            let lp = solve_occupancy_lp(&m, &[]).unwrap();
            let vi = solve_scalarized_mdp(&m, &[]).unwrap();
            assert!((lp.value.unwrap() - vi.value).abs() < 1e-6);
            let q = lp.occupancy.unwrap();
            assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn vacuous_and_infeasible_relaxations() {
        let m = gen_random_cmdp(11, 5, 3, 2, 0.9).unwrap();
        let free = solve_scalarized_mdp(&m.with_reward(m.reward().to_vec()), &[0.0, 0.0]).unwrap();
        let lp = solve_occupancy_lp(&m, &[-10.0, -10.0]).unwrap();
        assert!((lp.value.unwrap() - free.value).abs() < 1e-6);

        // xi above the per-constraint max of V_g is infeasible
        let max_g0 = solve_mdp_with_reward(&m, &m.translated()[0]).unwrap().value;
        let lp = solve_occupancy_lp(&m, &[max_g0 + 0.01, -10.0]).unwrap();
        assert_eq!(lp.status, LpStatus::Infeasible);
        let lp = solve_occupancy_lp(&m, &[max_g0 - 0.01, -10.0]).unwrap();
        assert_eq!(lp.status, LpStatus::Optimal);
    }

    #[test]
    fn value_map_on_zero_utility() {
        // u = 0.9, b = 9 gives g = 0 exactly: feasible iff xi <= 0
        let m = single_state(0.9, 9.0);
        let grid = vec![vec![-1.0], vec![0.0], vec![0.5]];
        let vals = primal_value_map(&m, &grid).unwrap();
        assert!((vals[0].unwrap() - 10.0).abs() < 1e-9);
        assert!((vals[1].unwrap() - 10.0).abs() < 1e-9);
        assert!(vals[2].is_none());
    }

    #[test]
    fn dual_regularized_closed_forms() {
        let m = single_state(1.0, 1.0);
        let cost = QuadraticCost::new(1.0).unwrap();
        // D_h(0) = max V_r = 10
        assert!((dual_regularized(&m, &cost, &[0.0]).unwrap() - 10.0).abs() < 1e-9);
        // lam = 2: D(2) = 10 + 2 * 9 = 28, xi-part = 1
        assert!((dual_regularized(&m, &cost, &[2.0]).unwrap() - 29.0).abs() < 1e-9);
    }

    #[test]
    fn regularized_on_zero_utility() {
        let m = single_state(0.9, 9.0);
        let cost = QuadraticCost::new(1.0).unwrap();
        let report = solve_regularized(&m, &cost, &OracleOptions::default()).unwrap();
        assert_eq!(report.status, OracleStatus::Optimal);
        assert!((report.primal_value.unwrap() - 10.0).abs() < 1e-9);
        assert!(report.xi_star[0].abs() < 1e-9);
    }

    #[test]
    fn regularized_without_constraints() {
        let m = gen_random_cmdp(2, 4, 2, 0, 0.9).unwrap();
        let cost = QuadraticCost::new(0.5).unwrap();
        let report = solve_regularized(&m, &cost, &OracleOptions::default()).unwrap();
        let free = solve_scalarized_mdp(&m, &[]).unwrap().value;
        assert!((report.value().unwrap() - free).abs() < 1e-9);
        assert!((report.dual_value.unwrap() - free).abs() < 1e-9);
    }

    #[test]
    fn grid_restricted_to_infeasible_region() {
        let m = single_state(0.9, 9.0);
        let cost = QuadraticCost::new(1.0).unwrap();
        let opts = OracleOptions {
            grid_lo: Some(0.5),
            grid_hi: Some(2.0),
            ..Default::default()
        };
        let report = solve_regularized(&m, &cost, &opts).unwrap();
        assert_eq!(report.status, OracleStatus::Infeasible);
    }

    #[test]
    fn residual_with_flat_cost_is_slope() {
        let m = gen_random_cmdp(5, 4, 2, 1, 0.9).unwrap();
        let cost = QuadraticCost::new(0.0).unwrap();
        let r = equilibrium_residual(&m, &cost, &[-3.0], 1e-3).unwrap();
        assert_eq!(r.residual, r.slopes);
        assert!(!r.one_sided[0]);
    }

    #[test]
    fn lp_rejects_relaxation_outside_box() {
        let m = single_state(1.0, 1.0);
        assert!(matches!(
            solve_occupancy_lp(&m, &[11.0]),
            Err(Error::Domain(_))
        ));
    }
}
