mod common;

use nalgebra::DMatrix;
use opdg::bundled;
use opdg::experiment::Baseline;
use opdg::game::{stack_input_matrix, Method};
use opdg::identify::ido::{input_error, solve_ido, IdoConfig};
use opdg::identify::tfo::solve_tfo;
use opdg::linalg::max_abs;
use opdg::riccati::{solve_coupled_are, RICCATI_TOL};
use opdg::sim::{simulate_closed_loop, trajectory_error};
use opdg::Error;

#[test]
fn equilibrium_weights_give_zero_error() {
    let g = common::team_game();
    let base = Baseline::new(g).unwrap();
    let e = input_error(&base.game, &base.ne, (&DMatrix::identity(4, 4), &DMatrix::identity(2, 2)), &base.traj).unwrap();
    assert!(e < 1e-14, "{e}");
}

/// For `ẋ = ax + u` with weights `(q, r)` the gain is `a + √(a² + q/r)`, and
/// the error of a candidate gain `k'` along `x₀e^{(a−k)t}` integrates to
/// `(k' − k)² x₀² (1 − e^{−2(k−a)T}) / (2(k − a))`.
#[test]
fn doubled_state_weight_matches_closed_form_integral() {
    let (a, q, r, x0) = (0.5, 1.0, 1.0, 1.5);
    let g = common::scalar_single(a, q, r, x0);
    let ne = solve_coupled_are(&g).unwrap();
    let k = a + (a * a + q / r).sqrt();
    let k2 = a + (a * a + 2.0 * q / r).sqrt();
    let horizon = 10.0;
    let traj = simulate_closed_loop(&g, &ne.k, horizon, 1e-3).unwrap();
    let decay = 2.0 * (k - a);
    let oracle = (k2 - k).powi(2) * x0 * x0 * (1.0 - (-decay * horizon).exp()) / decay;
    let e = input_error(&g, &ne, (&common::s(2.0 * q), &common::s(r)), &traj).unwrap();
    assert!(e > 0.0);
    assert!((e - oracle).abs() < 1e-5 * oracle, "{e} vs {oracle}");
}

#[test]
fn trajectory_free_weights_give_negligible_error() {
    let base = Baseline::new(common::team_game()).unwrap();
    let pot = solve_tfo(&base.game, &base.ne).unwrap();
    let e = input_error(&base.game, &base.ne, (&pot.qp, &pot.rp), &base.traj).unwrap();
    assert!(e <= 1e-8, "{e}");
}

#[test]
fn unstabilizable_candidate_is_an_error() {
    let base = Baseline::new(bundled::example2()).unwrap();
    let q = DMatrix::identity(3, 3);
    let r = DMatrix::identity(2, 2);
    assert!(input_error(&base.game, &base.ne, (&q, &r), &base.traj).is_ok());
    let invalid = -DMatrix::identity(2, 2);
    assert!(input_error(&base.game, &base.ne, (&q, &invalid), &base.traj).is_err());
}

#[test]
fn optimal_initial_weights_are_returned_unchanged() {
    let base = Baseline::new(common::team_game()).unwrap();
    let cfg = IdoConfig::default();
    let out = solve_ido(&base.game, &base.ne, &base.traj, &cfg).unwrap();
    assert!(max_abs(&(&out.potential.qp - DMatrix::identity(4, 4))) < 1e-12);
    assert!(max_abs(&(&out.potential.rp - DMatrix::identity(2, 2))) < 1e-12);
    assert_eq!(out.potential.method, Method::Ido);
}

#[test]
fn invalid_configuration_is_rejected() {
    let base = Baseline::new(common::team_game()).unwrap();
    let cfg = IdoConfig {
        max_iterations: 0,
        penalty_weight: 0.0,
        ..IdoConfig::default()
    };
    match solve_ido(&base.game, &base.ne, &base.traj, &cfg) {
        Err(Error::Validation(v)) => assert_eq!(v.len(), 2, "{v:?}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn second_example_search_meets_its_invariants() {
    let base = Baseline::new(bundled::example2()).unwrap();
    let out = solve_ido(&base.game, &base.ne, &base.traj, &IdoConfig::default()).unwrap();
    let pot = &out.potential;

    let b = stack_input_matrix(&base.game.dynamics);
    let rinv = pot.rp.clone().try_inverse().unwrap();
    let a = &base.game.dynamics.a;
    let residual = a.transpose() * &pot.pp + &pot.pp * a + &pot.qp - &pot.pp * &b * rinv * b.transpose() * &pot.pp;
    assert!(residual.norm() < RICCATI_TOL * (1.0 + pot.pp.norm()), "{}", residual.norm());

    assert!(out.hinge_violation < 1e-6 * out.samples as f64, "{}", out.hinge_violation);
    assert!(out.best_history.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(out.best_history.len(), out.evaluations);

    let e_x = trajectory_error(&base.potential_trajectory(pot).unwrap(), &base.traj).unwrap().value;
    assert!(e_x <= 0.05, "{e_x}");
}
