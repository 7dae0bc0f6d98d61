use proptest::prelude::*;

use rescrl_core::cmdp::{evaluate_policy, Policy};
use rescrl_core::envs::gen_random_cmdp;
use rescrl_core::oracle::{
    dual_regularized, equilibrium_residual, linspace, minimize_perturbed_dual, primal_value_map,
    solve_occupancy_lp, solve_regularized, solve_scalarized_mdp, DualStatus, OracleOptions,
    OracleStatus,
};
use rescrl_core::resilience::{CostFunction, QuadraticCost};

fn dual(model: &rescrl_core::Cmdp, lam: &[f64]) -> f64 {
    solve_scalarized_mdp(model, lam).unwrap().value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weak_duality(seed in 0u64..500, m in 1usize..3, lam in prop::collection::vec(0.0f64..5.0, 2), xi in prop::collection::vec(-4.0f64..4.0, 2)) {
        let model = gen_random_cmdp(seed, 5, 3, m, 0.9).unwrap();
        let (lam, xi) = (&lam[..m], &xi[..m]);
        if let Some(v) = solve_occupancy_lp(&model, xi).unwrap().value {
            let lhs = dual(&model, lam) - lam.iter().zip(xi).map(|(l, x)| l * x).sum::<f64>();
            prop_assert!(lhs >= v - 1e-6, "{lhs} < {v}");
        }
    }

    #[test]
    fn duals_convex_along_segments(seed in 0u64..500, a in prop::collection::vec(0.0f64..5.0, 2), b in prop::collection::vec(0.0f64..5.0, 2), t in 0.0f64..1.0, alpha in 0.01f64..2.0) {
        let model = gen_random_cmdp(seed, 5, 3, 2, 0.9).unwrap();
        let cost = QuadraticCost::new(alpha).unwrap();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        let chord = t * dual(&model, &a) + (1.0 - t) * dual(&model, &b);
        prop_assert!(dual(&model, &mid) <= chord + 1e-8);
        let dh = |l: &[f64]| dual_regularized(&model, &cost, l).unwrap();
        prop_assert!(dh(&mid) <= t * dh(&a) + (1.0 - t) * dh(&b) + 1e-8);
    }

    #[test]
    fn dual_is_conjugate_of_value_map(seed in 0u64..500, lam in 0.0f64..3.0) {
        let model = gen_random_cmdp(seed, 5, 3, 1, 0.9).unwrap();
        let bound = model.value_bound();
        let axis = linspace(-bound, bound, 201);
        let step = axis[1] - axis[0];
        let grid: Vec<Vec<f64>> = axis.iter().map(|x| vec![*x]).collect();
        let values = primal_value_map(&model, &grid).unwrap();
        let best = axis
            .iter()
            .zip(&values)
            .filter_map(|(x, v)| v.map(|v| v + lam * x))
            .fold(f64::NEG_INFINITY, f64::max);
        let gap = dual(&model, &[lam]) - best;
        prop_assert!(gap >= -1e-8 && gap <= lam * step + 1e-4, "gap {gap}");
    }

    #[test]
    fn regularized_dual_bounds_regularized_primal(seed in 0u64..500, lam in 0.0f64..3.0, alpha in 0.05f64..1.0) {
        let model = gen_random_cmdp(seed, 5, 3, 1, 0.9).unwrap();
        let cost = QuadraticCost::new(alpha).unwrap();
        let report = solve_regularized(&model, &cost, &OracleOptions::default()).unwrap();
        let v_h = report.value().unwrap();
        prop_assert!(dual_regularized(&model, &cost, &[lam]).unwrap() >= v_h - 1e-6);
    }
}

/// Multiplier bound from a strictly feasible relaxation: with the uniform
/// policy and `xi = V_g - 1`, the optimal multipliers sum to at most
/// `V_h* - V_r + h(xi)`.
#[test]
fn optimal_multipliers_obey_slater_bound() {
    for (seed, m) in [(0u64, 1usize), (3, 1), (4, 1), (9, 1), (1, 2), (5, 2)] {
        let model = gen_random_cmdp(seed, 6, 3, m, 0.9).unwrap();
        let cost = QuadraticCost::new(0.2).unwrap();
        let report = solve_regularized(&model, &cost, &OracleOptions::default()).unwrap();
        let uniform = Policy::uniform(6, 3);
        let vb = evaluate_policy(&model, &uniform, None).unwrap();
        let xi_bar: Vec<f64> = vb.v_utils_rho.iter().map(|v| v - 1.0).collect();
        let c_h = report.value().unwrap() - vb.v_reward_rho + cost.value(&xi_bar);
        let total: f64 = report.lambda_star.iter().sum();
        assert!(total <= c_h + 1e-6, "seed {seed}: sum {total} > {c_h}");
    }
}

#[test]
fn primal_and_dual_routes_agree() {
    let cost = QuadraticCost::new(0.2).unwrap();
    for seed in 100..110u64 {
        let model = gen_random_cmdp(seed, 6, 3, 1, 0.9).unwrap();
        let r = solve_regularized(&model, &cost, &OracleOptions::default()).unwrap();
        let (p, d) = (r.primal_value.unwrap(), r.dual_value.unwrap());
        assert!((p - d).abs() <= 1e-3, "seed {seed}: {p} vs {d}");
        assert!(d >= p - 1e-4);
        assert_eq!(r.status, OracleStatus::Optimal);
    }
    let model = gen_random_cmdp(7, 6, 3, 2, 0.9).unwrap();
    let r = solve_regularized(&model, &cost, &OracleOptions::default()).unwrap();
    let (p, d) = (r.primal_value.unwrap(), r.dual_value.unwrap());
    assert!((p - d).abs() <= 1e-3 && d >= p - 1e-4, "{p} vs {d}");
}

#[test]
fn perturbed_dual_matches_lp_value() {
    let model = gen_random_cmdp(4, 6, 3, 1, 0.9).unwrap();
    for xi in [-3.0, -1.0, 0.0, 0.5] {
        let lp = solve_occupancy_lp(&model, &[xi]).unwrap().value;
        let d = minimize_perturbed_dual(&model, &[xi], 100.0).unwrap();
        match lp {
            Some(v) => {
                assert_eq!(d.status, DualStatus::Attained);
                assert!((d.value - v).abs() <= 1e-6, "xi {xi}: {} vs {v}", d.value);
            }
            None => assert_eq!(d.status, DualStatus::CapBound),
        }
    }
}

#[test]
fn equilibrium_residual_vanishes_only_at_the_optimum() {
    // V* is locally linear around the optimal relaxation of this instance
    let model = gen_random_cmdp(4, 6, 3, 1, 0.9).unwrap();
    let cost = QuadraticCost::new(0.2).unwrap();
    let report = solve_regularized(&model, &cost, &OracleOptions::default()).unwrap();
    let delta = 1e-4;
    let at = equilibrium_residual(&model, &cost, &report.xi_star, delta).unwrap();
    assert!(!at.one_sided[0]);
    assert!(at.inf_norm() <= 10.0 * delta, "{at:?}");
    let far = [report.xi_star[0] + 1.0];
    let off = equilibrium_residual(&model, &cost, &far, delta).unwrap();
    assert!(
        off.inf_norm() >= 10.0 * at.inf_norm().max(10.0 * delta),
        "{off:?}"
    );
}

#[test]
fn equilibrium_residual_rejects_bad_input() {
    let model = gen_random_cmdp(4, 6, 3, 1, 0.9).unwrap();
    let cost = QuadraticCost::new(0.2).unwrap();
    assert!(equilibrium_residual(&model, &cost, &[0.0], 0.0).is_err());
    assert!(equilibrium_residual(&model, &cost, &[9.9], 1e-3).is_err());
}
