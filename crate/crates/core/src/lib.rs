//! Tabular constrained MDP solvers that search jointly over a policy and a
//! relaxation of the constraint thresholds.
//!
//! The crate is organized bottom-up:
//!
//! - [`cmdp`]: the tabular model, exact policy evaluation, visitation
//!   distributions and the simplex projection.
//! - [`resilience`]: relaxation cost functions, the relaxation and multiplier
//!   boxes and the regularized Lagrangian.
//! - [`algorithms`]: the projected primal-dual solver, its optimistic variant
//!   and the non-resilient baseline.
//! - [`oracle`]: occupancy-measure linear programming, dual functions and the
//!   ground-truth regularized optimum used to score the solvers.
//! - [`envs`]: builders for random instances and the monitoring problems.
//! - [`metrics`]: regrets, violations and oscillation statistics.
//! - [`config`]: JSON run configurations and trace/CSV emission.

pub mod algorithms;
pub mod cmdp;
pub mod config;
pub mod envs;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod resilience;
pub mod tolerances;

pub use algorithms::{AlgoConfig, Algorithm, ResilientIterate, RunOutput, Trace, TraceRecord};
pub use cmdp::{Cmdp, Policy, ValueBundle, VisitationDistribution};
pub use error::{Error, Result};
pub use resilience::{CostFunction, CostSpec, MultiplierDomain, QuadraticCost, Relaxation};
