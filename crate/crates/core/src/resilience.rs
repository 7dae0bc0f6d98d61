//! Relaxation costs, the relaxation and multiplier boxes, and the regularized
//! Lagrangian `V_{r + lam^T g}(rho) - h(xi) - lam^T xi`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cmdp::{evaluate_policy, Cmdp, Policy};
use crate::error::{Error, Result};
use crate::tolerances::DEFAULT_LAMBDA_CAP;

/// A convex relaxation cost `h` with `h(0) = 0`.
///
/// Implementors expose the value, gradient and the curvature constants used
/// by the step-size theory, plus the maximizer of `-h(xi) - lam^T xi` over the
/// relaxation box, which the dual function needs in closed form.
pub trait CostFunction: fmt::Debug + Send + Sync {
    fn value(&self, xi: &[f64]) -> f64;
    fn gradient(&self, xi: &[f64]) -> Vec<f64>;
    /// Lipschitz constant `L_h` of the gradient.
    fn gradient_lipschitz(&self) -> f64;
    /// Strong-convexity modulus `sigma`.
    fn strong_convexity(&self) -> f64;
    /// `argmax_{|xi_i| <= bound} { -h(xi) - lam^T xi }`.
    fn relaxation_response(&self, lam: &[f64], bound: f64) -> Vec<f64>;
}

/// `h(xi) = alpha ||xi||^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCost {
    alpha: f64,
}

impl QuadraticCost {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!(
                "cost weight alpha = {alpha} must be finite and >= 0"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl CostFunction for QuadraticCost {
    fn value(&self, xi: &[f64]) -> f64 {
        self.alpha * xi.iter().map(|x| x * x).sum::<f64>()
    }

    fn gradient(&self, xi: &[f64]) -> Vec<f64> {
        xi.iter().map(|x| 2.0 * self.alpha * x).collect()
    }

    fn gradient_lipschitz(&self) -> f64 {
        2.0 * self.alpha
    }

    fn strong_convexity(&self) -> f64 {
        2.0 * self.alpha
    }

    fn relaxation_response(&self, lam: &[f64], bound: f64) -> Vec<f64> {
        lam.iter()
            .map(|&l| {
                if self.alpha > 0.0 {
                    (-l / (2.0 * self.alpha)).clamp(-bound, bound)
                } else if l > 0.0 {
                    -bound
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Serialized cost description, `{"kind": "quadratic", "alpha": ...}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    Quadratic { alpha: f64 },
}

impl CostSpec {
    pub fn build(&self) -> Result<QuadraticCost> {
        match *self {
            CostSpec::Quadratic { alpha } => QuadraticCost::new(alpha),
        }
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            CostSpec::Quadratic { alpha } => alpha,
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        match *self {
            CostSpec::Quadratic { .. } => CostSpec::Quadratic { alpha },
        }
    }
}

/// Returns `(h(xi), grad h(xi))`.
pub fn cost_eval(cost: &dyn CostFunction, xi: &[f64]) -> (f64, Vec<f64>) {
    (cost.value(xi), cost.gradient(xi))
}

/// A relaxation vector inside the box `|xi_i| <= 1 / (1 - gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation(Vec<f64>);

impl Relaxation {
    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for Relaxation {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Clamps every coordinate to `[-1/(1-gamma), 1/(1-gamma)]`.
pub fn project_relaxation(xi: &[f64], gamma: f64) -> Relaxation {
    let bound = 1.0 / (1.0 - gamma);
    Relaxation(xi.iter().map(|x| x.clamp(-bound, bound)).collect())
}

/// The multiplier box `[0, cap]^m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierDomain {
    cap: f64,
}

impl MultiplierDomain {
    pub fn new(cap: f64) -> Result<Self> {
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(Error::Config(format!(
                "multiplier cap {cap} must be positive and finite"
            )));
        }
        Ok(Self { cap })
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn contains(&self, lam: &[f64]) -> bool {
        lam.iter().all(|&l| (0.0..=self.cap).contains(&l))
    }
}

impl Default for MultiplierDomain {
    fn default() -> Self {
        Self {
            cap: DEFAULT_LAMBDA_CAP,
        }
    }
}

/// Clamps every coordinate to `[0, cap]`.
pub fn project_multiplier(lam: &[f64], domain: &MultiplierDomain) -> Vec<f64> {
    lam.iter().map(|l| l.clamp(0.0, domain.cap)).collect()
}

/// Regularized Lagrangian `V_{r+lam^T g}^pi(rho) - h(xi) - lam^T xi`.
pub fn lagrangian(
    model: &Cmdp,
    policy: &Policy,
    xi: &[f64],
    lam: &[f64],
    cost: &dyn CostFunction,
) -> Result<f64> {
    if xi.len() != model.num_constraints() {
        return Err(Error::Domain(
            "relaxation length differs from constraint count".into(),
        ));
    }
    let vb = evaluate_policy(model, policy, Some(lam))?;
    let scalar = vb.scalarized.expect("weights given").v_rho;
    Ok(lagrangian_from_values(scalar, xi, lam, cost))
}

pub(crate) fn lagrangian_from_values(
    scalarized_v_rho: f64,
    xi: &[f64],
    lam: &[f64],
    cost: &dyn CostFunction,
) -> f64 {
    scalarized_v_rho - cost.value(xi) - lam.iter().zip(xi).map(|(l, x)| l * x).sum::<f64>()
}
