//! Shared numerical tolerances.
//!
//! Solvers and tests read the same constants so a tightened tolerance in one
//! place cannot silently drift from the checks that rely on it.

/// Row sums of transition kernels and initial distributions.
pub const PROBABILITY_SUM: f64 = 1e-12;

/// Slack on policy rows and visitation weights.
pub const INVARIANT_SLACK: f64 = 1e-10;

/// Maximum accepted residual of the dense policy-evaluation solve.
pub const SOLVE_RESIDUAL: f64 = 1e-8;

/// Bellman residual at which value iteration stops.
pub const VALUE_ITERATION_RESIDUAL: f64 = 1e-10;

/// Pivot and reduced-cost tolerance inside the simplex tableau.
pub const SIMPLEX_PIVOT: f64 = 1e-9;

/// Phase-one artificial mass above which an LP is declared infeasible.
pub const LP_INFEASIBLE_MASS: f64 = 1e-8;

/// Accepted mismatch between an LP solution and the exact re-evaluation of
/// the policy recovered from it.
pub const LP_RECOVERY: f64 = 1e-6;

/// Row mass below which a recovered policy row falls back to uniform.
pub const DEGENERATE_ROW_MASS: f64 = 1e-12;

/// Strong-duality agreement required for an `optimal` oracle status.
pub const DUALITY_AGREEMENT: f64 = 1e-3;

/// Disagreement beyond which the oracle reports a diagnostics error.
pub const DUALITY_FAILURE: f64 = 1e-2;

/// Default finite-difference step for the equilibrium residual.
pub const DEFAULT_FD_STEP: f64 = 1e-3;

/// Default per-coordinate multiplier cap.
pub const DEFAULT_LAMBDA_CAP: f64 = 100.0;
