//! Tabular constrained MDP model, exact policy evaluation and the projection
//! primitives shared by every solver.
//!
//! Tables are stored flat in row-major order: a per-(s,a) table is indexed by
//! `s * num_actions + a` and the transition kernel by
//! `(s * num_actions + a) * num_states + s'`.
//!
//! Policy evaluation uses a direct dense LU solve of `(I - gamma P^pi) V = c^pi`.
//! This is exact to rounding and is intended for models with at most a few
//! thousand states.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances::{INVARIANT_SLACK, PROBABILITY_SUM, SOLVE_RESIDUAL};

/// A tabular constrained MDP with reward `r`, utilities `u_i` and thresholds
/// `b_i`. The constraints `V_{u_i}(rho) >= b_i` are carried in translated form
/// `V_{g_i}(rho) >= 0` with `g_i = u_i - (1 - gamma) b_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cmdp {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    rho: Vec<f64>,
    transitions: Vec<f64>,
    reward: Vec<f64>,
    utilities: Vec<Vec<f64>>,
    thresholds: Vec<f64>,
    translated: Vec<Vec<f64>>,
}

/// One violated model invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Shape(String),
    Gamma(f64),
    NonFinite(String),
    TransitionRowSum {
        state: usize,
        action: usize,
        sum: f64,
    },
    NegativeTransition {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
    },
    RhoSum(f64),
    NegativeRho {
        state: usize,
        value: f64,
    },
    RewardRange {
        state: usize,
        action: usize,
        value: f64,
    },
    UtilityRange {
        constraint: usize,
        state: usize,
        action: usize,
        value: f64,
    },
    ThresholdRange {
        constraint: usize,
        value: f64,
        upper: f64,
    },
    TranslatedRange {
        constraint: usize,
        state: usize,
        action: usize,
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Violation::Gamma(g) => write!(f, "gamma {g} outside [0, 1)"),
            Violation::NonFinite(what) => write!(f, "non-finite entry in {what}"),
            Violation::TransitionRowSum { state, action, sum } => {
                write!(f, "transition row (s={state}, a={action}) sums to {sum}")
            }
            Violation::NegativeTransition {
                state,
                action,
                next,
                value,
            } => write!(
                f,
                "negative transition probability P({next}|{state},{action}) = {value}"
            ),
            Violation::RhoSum(sum) => write!(f, "initial distribution sums to {sum}"),
            Violation::NegativeRho { state, value } => {
                write!(f, "negative initial mass rho({state}) = {value}")
            }
            Violation::RewardRange {
                state,
                action,
                value,
            } => {
                write!(f, "reward r({state},{action}) = {value} outside [0, 1]")
            }
            Violation::UtilityRange {
                constraint,
                state,
                action,
                value,
            } => write!(
                f,
                "utility u_{constraint}({state},{action}) = {value} outside [0, 1]"
            ),
            Violation::ThresholdRange {
                constraint,
                value,
                upper,
            } => write!(f, "threshold b_{constraint} = {value} outside (0, {upper}]"),
            Violation::TranslatedRange {
                constraint,
                state,
                action,
                value,
            } => write!(
                f,
                "translated utility g_{constraint}({state},{action}) = {value} outside [-1, 1]"
            ),
        }
    }
}

/// Translates utility thresholds into zero-threshold utilities
/// `g_i(s,a) = u_i(s,a) - (1 - gamma) b_i`.
pub fn translate_constraints(
    utilities: &[Vec<f64>],
    thresholds: &[f64],
    gamma: f64,
) -> Result<Vec<Vec<f64>>> {
    if utilities.len() != thresholds.len() {
        return Err(Error::Domain(format!(
            "{} utility tables but {} thresholds",
            utilities.len(),
            thresholds.len()
        )));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Domain(format!("gamma {gamma} outside [0, 1)")));
    }
    let upper = 1.0 / (1.0 - gamma);
    utilities
        .iter()
        .zip(thresholds)
        .enumerate()
        .map(|(i, (u, &b))| {
            if !(b > 0.0 && b <= upper) {
                return Err(Error::Domain(format!(
                    "threshold b_{i} = {b} outside (0, {upper}]"
                )));
            }
            let shift = (1.0 - gamma) * b;
            Ok(u.iter().map(|&x| x - shift).collect())
        })
        .collect()
}

impl Cmdp {
    /// Builds a model and rejects it if any invariant is violated.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        num_states: usize,
        num_actions: usize,
        gamma: f64,
        rho: Vec<f64>,
        transitions: Vec<f64>,
        reward: Vec<f64>,
        utilities: Vec<Vec<f64>>,
        thresholds: Vec<f64>,
    ) -> Result<Self> {
        let model = Self::new_unchecked(
            num_states,
            num_actions,
            gamma,
            rho,
            transitions,
            reward,
            utilities,
            thresholds,
        );
        let report = validate_cmdp(&model);
        if report.is_empty() {
            Ok(model)
        } else {
            let msgs: Vec<String> = report.iter().map(ToString::to_string).collect();
            Err(Error::Config(format!("invalid model: {}", msgs.join("; "))))
        }
    }

    /// Builds a model without validation. The translated utilities are
    /// computed arithmetically even when thresholds are out of range, so the
    /// result can be fed to [`validate_cmdp`].
    #[allow(clippy::too_many_arguments)]
    pub fn new_unchecked(
        num_states: usize,
        num_actions: usize,
        gamma: f64,
        rho: Vec<f64>,
        transitions: Vec<f64>,
        reward: Vec<f64>,
        utilities: Vec<Vec<f64>>,
        thresholds: Vec<f64>,
    ) -> Self {
        let translated = utilities
            .iter()
            .zip(&thresholds)
            .map(|(u, &b)| u.iter().map(|&x| x - (1.0 - gamma) * b).collect())
            .collect();
        Self {
            num_states,
            num_actions,
            gamma,
            rho,
            transitions,
            reward,
            utilities,
            thresholds,
            translated,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_constraints(&self) -> usize {
        self.utilities.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// Flat transition kernel, `(s * A + a) * S + s'`.
    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    /// Next-state distribution of the pair `(s, a)`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    pub fn utilities(&self) -> &[Vec<f64>] {
        &self.utilities
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Translated utilities `g_i`.
    pub fn translated(&self) -> &[Vec<f64>] {
        &self.translated
    }

    /// Largest attainable absolute value, `1 / (1 - gamma)`.
    pub fn value_bound(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }

    /// Per-(s,a) table `r + sum_i lam_i g_i`.
    pub fn scalarized_reward(&self, lam: &[f64]) -> Vec<f64> {
        let mut out = self.reward.clone();
        for (g, &l) in self.translated.iter().zip(lam) {
            if l != 0.0 {
                for (o, &x) in out.iter_mut().zip(g) {
                    *o += l * x;
                }
            }
        }
        out
    }

    /// Returns a copy of the model with a different reward table. The new
    /// table is not range-checked; it is meant for evaluating auxiliary
    /// objectives such as a single utility.
    pub fn with_reward(&self, reward: Vec<f64>) -> Self {
        Self {
            reward,
            ..self.clone()
        }
    }
}

/// Lists every violated invariant of `model`. An empty report means the model
/// is valid.
pub fn validate_cmdp(model: &Cmdp) -> Vec<Violation> {
    let mut report = Vec::new();
    let (ns, na) = (model.num_states, model.num_actions);
    if ns == 0 || na == 0 {
        report.push(Violation::Shape(format!("{ns} states, {na} actions")));
        return report;
    }
    if !(0.0..1.0).contains(&model.gamma) {
        report.push(Violation::Gamma(model.gamma));
    }
    let mut shapes_ok = true;
    let mut check_len = |what: &str, got: usize, want: usize| {
        if got != want {
            report.push(Violation::Shape(format!(
                "{what} has {got} entries, expected {want}"
            )));
            shapes_ok = false;
        }
    };
    check_len("rho", model.rho.len(), ns);
    check_len("transitions", model.transitions.len(), ns * na * ns);
    check_len("reward", model.reward.len(), ns * na);
    check_len("thresholds", model.thresholds.len(), model.utilities.len());
    for (i, u) in model.utilities.iter().enumerate() {
        check_len(&format!("utility {i}"), u.len(), ns * na);
    }
    if !shapes_ok {
        return report;
    }

    let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
    if !finite(&model.transitions) {
        report.push(Violation::NonFinite("transitions".into()));
    }
    if !finite(&model.rho) {
        report.push(Violation::NonFinite("rho".into()));
    }
    if !finite(&model.reward) {
        report.push(Violation::NonFinite("reward".into()));
    }

    for s in 0..ns {
        for a in 0..na {
            let row = model.transition_row(s, a);
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROBABILITY_SUM {
                report.push(Violation::TransitionRowSum {
                    state: s,
                    action: a,
                    sum,
                });
            }
            for (next, &p) in row.iter().enumerate() {
                if p < 0.0 {
                    report.push(Violation::NegativeTransition {
                        state: s,
                        action: a,
                        next,
                        value: p,
                    });
                }
            }
        }
    }

    let rho_sum: f64 = model.rho.iter().sum();
    if (rho_sum - 1.0).abs() > PROBABILITY_SUM {
        report.push(Violation::RhoSum(rho_sum));
    }
    for (s, &p) in model.rho.iter().enumerate() {
        if p < 0.0 {
            report.push(Violation::NegativeRho { state: s, value: p });
        }
    }

    for (k, &r) in model.reward.iter().enumerate() {
        if !(0.0..=1.0).contains(&r) {
            report.push(Violation::RewardRange {
                state: k / na,
                action: k % na,
                value: r,
            });
        }
    }
    let upper = model.value_bound();
    for (i, u) in model.utilities.iter().enumerate() {
        for (k, &x) in u.iter().enumerate() {
            if !(0.0..=1.0).contains(&x) {
                report.push(Violation::UtilityRange {
                    constraint: i,
                    state: k / na,
                    action: k % na,
                    value: x,
                });
            }
        }
        let b = model.thresholds[i];
        if !(b > 0.0 && b <= upper) {
            report.push(Violation::ThresholdRange {
                constraint: i,
                value: b,
                upper,
            });
        }
        for (k, &x) in model.translated[i].iter().enumerate() {
            if !(-1.0..=1.0).contains(&x) {
                report.push(Violation::TranslatedRange {
                    constraint: i,
                    state: k / na,
                    action: k % na,
                    value: x,
                });
            }
        }
    }
    report
}

/// A stochastic policy, one point of the action simplex per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    /// Deterministic policy choosing `actions[s]` in state `s`.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Self {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * num_actions + a] = 1.0;
        }
        Self {
            num_states: actions.len(),
            num_actions,
            probs,
        }
    }

    /// Builds a policy from a flat table, checking that each row lies on the
    /// simplex.
    pub fn from_flat(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != num_states * num_actions {
            return Err(Error::Domain(format!(
                "policy table has {} entries, expected {}",
                probs.len(),
                num_states * num_actions
            )));
        }
        let policy = Self {
            num_states,
            num_actions,
            probs,
        };
        for s in 0..num_states {
            let row = policy.row(s);
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > INVARIANT_SLACK || row.iter().any(|&p| p < 0.0 || !p.is_finite())
            {
                return Err(Error::Domain(format!(
                    "policy row {s} is not on the simplex"
                )));
            }
        }
        Ok(policy)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let num_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != num_actions) {
            return Err(Error::Domain("ragged policy rows".into()));
        }
        Self::from_flat(rows.len(), num_actions, rows.concat())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub(crate) fn row_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.num_actions + a]
    }

    /// Largest per-entry absolute difference to `other`.
    pub fn max_abs_diff(&self, other: &Policy) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Scalarized values for `r + lam^T g`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarizedValues {
    pub weights: Vec<f64>,
    pub v: Vec<f64>,
    pub q: Vec<f64>,
    pub v_rho: f64,
}

/// Exact values of a policy for the reward and every translated utility.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueBundle {
    pub v_reward: Vec<f64>,
    pub q_reward: Vec<f64>,
    pub adv_reward: Vec<f64>,
    pub v_utils: Vec<Vec<f64>>,
    pub q_utils: Vec<Vec<f64>>,
    pub v_reward_rho: f64,
    pub v_utils_rho: Vec<f64>,
    pub scalarized: Option<ScalarizedValues>,
}

/// Discounted state visitation distribution `d_rho^pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitationDistribution {
    pub d: Vec<f64>,
}

impl VisitationDistribution {
    /// Total mass on a set of states.
    pub fn mass(&self, states: impl IntoIterator<Item = usize>) -> f64 {
        states.into_iter().map(|s| self.d[s]).sum()
    }
}

fn check_policy_shape(model: &Cmdp, policy: &Policy) -> Result<()> {
    if policy.num_states != model.num_states || policy.num_actions != model.num_actions {
        return Err(Error::Domain(format!(
            "policy is {}x{}, model is {}x{}",
            policy.num_states, policy.num_actions, model.num_states, model.num_actions
        )));
    }
    Ok(())
}

/// `I - gamma P^pi` as a dense matrix.
fn evaluation_matrix(model: &Cmdp, policy: &Policy) -> DMatrix<f64> {
    let ns = model.num_states;
    let mut m = DMatrix::<f64>::identity(ns, ns);
    for s in 0..ns {
        for a in 0..model.num_actions {
            let p = policy.prob(s, a);
            if p == 0.0 {
                continue;
            }
            let w = model.gamma * p;
            for (next, &t) in model.transition_row(s, a).iter().enumerate() {
                m[(s, next)] -= w * t;
            }
        }
    }
    m
}

fn policy_average(model: &Cmdp, policy: &Policy, table: &[f64]) -> Vec<f64> {
    (0..model.num_states)
        .map(|s| {
            policy
                .row(s)
                .iter()
                .zip(&table[s * model.num_actions..(s + 1) * model.num_actions])
                .map(|(p, c)| p * c)
                .sum()
        })
        .collect()
}

/// `Q(s,a) = c(s,a) + gamma sum_s' P(s'|s,a) V(s')`.
pub fn q_from_v(model: &Cmdp, cost: &[f64], v: &[f64]) -> Vec<f64> {
    let (ns, na) = (model.num_states, model.num_actions);
    let mut q = Vec::with_capacity(ns * na);
    for s in 0..ns {
        for a in 0..na {
            let ev: f64 = model
                .transition_row(s, a)
                .iter()
                .zip(v)
                .map(|(p, x)| p * x)
                .sum();
            q.push(cost[s * na + a] + model.gamma * ev);
        }
    }
    q
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `(I - gamma P^pi) V = c^pi` for several cost tables sharing one LU
/// factorization. Returns one value vector per table.
fn solve_values(model: &Cmdp, policy: &Policy, costs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    let ns = model.num_states;
    let matrix = evaluation_matrix(model, policy);
    let mut rhs = DMatrix::<f64>::zeros(ns, costs.len());
    for (j, c) in costs.iter().enumerate() {
        for (s, x) in policy_average(model, policy, c).into_iter().enumerate() {
            rhs[(s, j)] = x;
        }
    }
    let lu = matrix.clone().lu();
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("policy evaluation matrix is singular".into()))?;
    let residual = (&matrix * &sol - &rhs).amax();
    let scale = rhs.amax().max(1.0);
    if !(residual <= SOLVE_RESIDUAL * scale) {
        return Err(Error::Numerical(format!(
            "policy evaluation residual {residual:e} exceeds {SOLVE_RESIDUAL:e}"
        )));
    }
    Ok((0..costs.len())
        .map(|j| sol.column(j).iter().copied().collect())
        .collect())
}

/// Exact value and action-value tables of `policy` for an arbitrary per-(s,a)
/// cost table.
pub fn evaluate_cost(model: &Cmdp, policy: &Policy, cost: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_policy_shape(model, policy)?;
    if cost.len() != model.num_states * model.num_actions {
        return Err(Error::Domain("cost table has the wrong size".into()));
    }
    let v = solve_values(model, policy, &[cost])?
        .pop()
        .expect("one column");
    let q = q_from_v(model, cost, &v);
    Ok((v, q))
}

/// Exact values of `policy` for the reward and every translated utility. When
/// `weights` is given, the bundle also carries the scalarized values for
/// `r + weights^T g`.
pub fn evaluate_policy(
    model: &Cmdp,
    policy: &Policy,
    weights: Option<&[f64]>,
) -> Result<ValueBundle> {
    check_policy_shape(model, policy)?;
    if let Some(w) = weights {
        if w.len() != model.num_constraints() {
            return Err(Error::Domain(format!(
                "{} multipliers for {} constraints",
                w.len(),
                model.num_constraints()
            )));
        }
        if w.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::Domain("multipliers must be nonnegative".into()));
        }
    }
    let mut costs: Vec<&[f64]> = vec![&model.reward];
    costs.extend(model.translated.iter().map(Vec::as_slice));
    let mut values = solve_values(model, policy, &costs)?.into_iter();

    let v_reward = values.next().expect("reward column");
    let q_reward = q_from_v(model, &model.reward, &v_reward);
    let na = model.num_actions;
    let adv_reward = q_reward
        .iter()
        .enumerate()
        .map(|(k, q)| q - v_reward[k / na])
        .collect();
    let v_utils: Vec<Vec<f64>> = values.collect();
    let q_utils: Vec<Vec<f64>> = v_utils
        .iter()
        .zip(&model.translated)
        .map(|(v, g)| q_from_v(model, g, v))
        .collect();
    let v_reward_rho = dot(&model.rho, &v_reward);
    let v_utils_rho: Vec<f64> = v_utils.iter().map(|v| dot(&model.rho, v)).collect();

    let scalarized = weights.map(|w| {
        let mut v = v_reward.clone();
        let mut q = q_reward.clone();
        for (i, &l) in w.iter().enumerate() {
            for (x, y) in v.iter_mut().zip(&v_utils[i]) {
                *x += l * y;
            }
            for (x, y) in q.iter_mut().zip(&q_utils[i]) {
                *x += l * y;
            }
        }
        let v_rho = v_reward_rho + w.iter().zip(&v_utils_rho).map(|(l, x)| l * x).sum::<f64>();
        ScalarizedValues {
            weights: w.to_vec(),
            v,
            q,
            v_rho,
        }
    });

    Ok(ValueBundle {
        v_reward,
        q_reward,
        adv_reward,
        v_utils,
        q_utils,
        v_reward_rho,
        v_utils_rho,
        scalarized,
    })
}

/// Normalized discounted visitation `d = (1 - gamma) rho^T (I - gamma P^pi)^{-1}`.
pub fn visitation(model: &Cmdp, policy: &Policy) -> Result<VisitationDistribution> {
    check_policy_shape(model, policy)?;
    let matrix = evaluation_matrix(model, policy).transpose();
    let rho = DVector::from_column_slice(&model.rho);
    let x = matrix
        .clone()
        .lu()
        .solve(&rho)
        .ok_or_else(|| Error::Numerical("visitation matrix is singular".into()))?;
    let residual = (&matrix * &x - &rho).amax();
    if !(residual <= SOLVE_RESIDUAL) {
        return Err(Error::Numerical(format!(
            "visitation residual {residual:e}"
        )));
    }
    let mut d: Vec<f64> = x.iter().map(|v| (1.0 - model.gamma) * v).collect();
    let total: f64 = d.iter().sum();
    for v in &mut d {
        *v /= total;
    }
    Ok(VisitationDistribution { d })
}

/// Euclidean projection onto the probability simplex by the sort-and-threshold
/// method.
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Domain(
            "cannot project an empty vector onto the simplex".into(),
        ));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain(
            "non-finite entry in simplex projection".into(),
        ));
    }
    let mut out = v.to_vec();
    project_simplex_in_place(&mut out);
    Ok(out)
}

/// In-place variant of [`project_simplex`]; `v` must be non-empty and finite.
pub(crate) fn project_simplex_in_place(v: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        cumulative += x;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if x - candidate > 0.0 {
            theta = candidate;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Deterministic policy that is greedy with respect to a per-(s,a) table;
/// ties go to the lowest action index.
pub fn greedy_policy(num_states: usize, num_actions: usize, q: &[f64]) -> Policy {
    let actions: Vec<usize> = (0..num_states)
        .map(|s| argmax_lowest(&q[s * num_actions..(s + 1) * num_actions]))
        .collect();
    Policy::deterministic(num_actions, &actions)
}

pub(crate) fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (a, &x) in row.iter().enumerate().skip(1) {
        if x > row[best] {
            best = a;
        }
    }
    best
}

/// On-disk environment schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvFile {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub rho: Vec<f64>,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<f64>>,
    pub utilities: Vec<Vec<Vec<f64>>>,
    pub thresholds: Vec<f64>,
}

impl From<&Cmdp> for EnvFile {
    fn from(m: &Cmdp) -> Self {
        let (ns, na) = (m.num_states, m.num_actions);
        let table = |t: &[f64]| -> Vec<Vec<f64>> { t.chunks(na).map(<[f64]>::to_vec).collect() };
        EnvFile {
            num_states: ns,
            num_actions: na,
            gamma: m.gamma,
            rho: m.rho.clone(),
            transitions: (0..ns)
                .map(|s| (0..na).map(|a| m.transition_row(s, a).to_vec()).collect())
                .collect(),
            reward: table(&m.reward),
            utilities: m.utilities.iter().map(|u| table(u)).collect(),
            thresholds: m.thresholds.clone(),
        }
    }
}

impl TryFrom<EnvFile> for Cmdp {
    type Error = Error;

    fn try_from(env: EnvFile) -> Result<Self> {
        let (ns, na) = (env.num_states, env.num_actions);
        let shape_err =
            |what: &str| Error::Config(format!("env field `{what}` has the wrong shape"));
        if env.transitions.len() != ns
            || env
                .transitions
                .iter()
                .any(|r| r.len() != na || r.iter().any(|p| p.len() != ns))
        {
            return Err(shape_err("transitions"));
        }
        let flat_table = |t: &[Vec<f64>], what: &str| -> Result<Vec<f64>> {
            if t.len() != ns || t.iter().any(|r| r.len() != na) {
                return Err(shape_err(what));
            }
            Ok(t.concat())
        };
        let reward = flat_table(&env.reward, "reward")?;
        let utilities = env
            .utilities
            .iter()
            .map(|u| flat_table(u, "utilities"))
            .collect::<Result<Vec<_>>>()?;
        let transitions = env.transitions.into_iter().flatten().flatten().collect();
        Cmdp::new(
            ns,
            na,
            env.gamma,
            env.rho,
            transitions,
            reward,
            utilities,
            env.thresholds,
        )
    }
}

impl Cmdp {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&EnvFile::from(self))?)
    }

    /// Parses the environment schema and validates the model.
    pub fn from_json(text: &str) -> Result<Self> {
        let env: EnvFile = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("malformed env JSON: {e}")))?;
        Cmdp::try_from(env)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_state(reward: f64, gamma: f64) -> Cmdp {
        Cmdp::new(
            1,
            1,
            gamma,
            vec![1.0],
            vec![1.0],
            vec![reward],
            vec![],
            vec![],
        )
        .unwrap()
    }

    fn two_cycle(gamma: f64) -> Cmdp {
        // s0 -> s1 -> s0, reward 1 at s0.
        Cmdp::new(
            2,
            1,
            gamma,
            vec![1.0, 0.0],
            vec![0.0, 1.0, 1.0, 0.0],
            vec![1.0, 0.0],
            vec![],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn translate_examples() {
        let g = translate_constraints(&[vec![1.0; 3]], &[10.0], 0.9).unwrap();
        assert!(g[0].iter().all(|x| x.abs() < 1e-12));
        let g = translate_constraints(&[vec![0.5; 3]], &[5.0], 0.9).unwrap();
        assert!(g[0].iter().all(|x| x.abs() < 1e-12));
        let g = translate_constraints(&[vec![1.0; 3]], &[1.0], 0.9).unwrap();
        assert!(g[0].iter().all(|x| (x - 0.9).abs() < 1e-12));
        assert!(matches!(
            translate_constraints(&[vec![1.0]], &[0.0], 0.9),
            Err(Error::Domain(_))
        ));
        assert!(translate_constraints(&[vec![1.0]], &[10.5], 0.9).is_err());
    }

    #[test]
    fn validate_reports_bad_row_and_threshold() {
        let m = Cmdp::new_unchecked(
            2,
            1,
            0.9,
            vec![0.5, 0.5],
            vec![0.9, 0.0, 0.0, 1.0],
            vec![0.0, 1.0],
            vec![vec![1.0, 1.0]],
            vec![0.0],
        );
        let report = validate_cmdp(&m);
        assert!(report.contains(&Violation::TransitionRowSum {
            state: 0,
            action: 0,
            sum: 0.9
        }));
        assert!(report
            .iter()
            .any(|v| matches!(v, Violation::ThresholdRange { constraint: 0, .. })));
        assert_eq!(report.len(), 2);
        let text = report[0].to_string();
        assert!(text.contains("s=0") && text.contains("a=0"));
    }

    #[test]
    fn single_state_value() {
        let m = single_state(1.0, 0.9);
        let vb = evaluate_policy(&m, &Policy::uniform(1, 1), None).unwrap();
        assert!((vb.v_reward[0] - 10.0).abs() < 1e-10);
        assert!((vb.v_reward_rho - 10.0).abs() < 1e-10);
    }

    #[test]
    fn two_cycle_value_and_visitation() {
        let m = two_cycle(0.5);
        let pi = Policy::uniform(2, 1);
        let vb = evaluate_policy(&m, &pi, None).unwrap();
        assert!((vb.v_reward[0] - 4.0 / 3.0).abs() < 1e-12);
        assert!((vb.v_reward[1] - 2.0 / 3.0).abs() < 1e-12);
        let d = visitation(&m, &pi).unwrap();
        assert!((d.d[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((d.d[1] - 1.0 / 3.0).abs() < 1e-12);
        let d1 = visitation(&single_state(0.3, 0.7), &Policy::uniform(1, 1)).unwrap();
        assert!((d1.d[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scalarized_requires_matching_weights() {
        let m = single_state(1.0, 0.9);
        assert!(evaluate_policy(&m, &Policy::uniform(1, 1), Some(&[1.0])).is_err());
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_simplex(&[0.5, 0.5]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(project_simplex(&[0.6, 0.6]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(project_simplex(&[]), Err(Error::Domain(_))));
    }

    #[test]
    fn projection_of_two_zero_matches_grid_search() {
        // brute force over the 2-simplex
        let target = [2.0, 0.0];
        let n = 100_000;
        let (mut best, mut best_d) = (0.0, f64::INFINITY);
        for k in 0..=n {
            let p = k as f64 / n as f64;
            let d = (p - target[0]).powi(2) + (1.0 - p - target[1]).powi(2);
            if d < best_d {
                best_d = d;
                best = p;
            }
        }
        let proj = project_simplex(&target).unwrap();
        assert!((proj[0] - best).abs() <= 1.0 / n as f64);
    }

    #[test]
    fn greedy_ties_lowest() {
        let pi = greedy_policy(3, 2, &[1.0, 2.0, 3.0, 3.0, 0.0, 0.0]);
        assert_eq!(pi.row(0), &[0.0, 1.0]);
        assert_eq!(pi.row(1), &[1.0, 0.0]);
        assert_eq!(pi.row(2), &[1.0, 0.0]);
    }

    #[test]
    fn env_json_roundtrip_and_validation() {
        let m = two_cycle(0.5);
        let back = Cmdp::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let bad = m
            .to_json()
            .unwrap()
            .replace("\"gamma\": 0.5", "\"gamma\": 1.5");
        assert!(matches!(Cmdp::from_json(&bad), Err(Error::Config(_))));
    }
}
