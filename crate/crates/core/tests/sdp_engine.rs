//! SDP engine against closed-form answers and brute-force oracles.

mod common;

use common::sdp_oracle::{mat3, oracle_minimum, oracle_problem, ORACLE_CASES};
use nalgebra::{DMatrix, DVector};
use opdg::sdp::{check_solution, solve_sdp, LinExpr, SdpProblem, SdpStatus, VarKind, SDP_TOL};
use proptest::prelude::*;

#[test]
fn oracle_reproduces_frozen_optima() {
    for (c, frozen) in ORACLE_CASES {
        let v = oracle_minimum(&c);
        assert!((v - frozen).abs() < 1e-9, "oracle {v} vs frozen {frozen} for c = {c:?}");
    }
}

#[test]
fn solver_matches_oracle_optima() {
    for (c, frozen) in ORACLE_CASES {
        let p = oracle_problem(&c);
        let sol = solve_sdp(&p);
        assert_eq!(sol.status, SdpStatus::Optimal, "c = {c:?}");
        assert!(
            (sol.objective_value - frozen).abs() <= 1e-6,
            "solver {} vs oracle {frozen}",
            sol.objective_value
        );
        let report = check_solution(&p, &sol, SDP_TOL);
        assert!(report.passed, "{report:?}");
    }
}

#[test]
fn condition_number_of_fixed_diagonal() {
    let mut p = SdpProblem::new();
    let q = p.add_var("q", VarKind::Scalar);
    let r = p.add_var("r", VarKind::Scalar);
    let alpha = p.add_var("alpha", VarKind::Scalar);
    p.add_eq("q = 3", p.expr(q).add_constant(&DMatrix::from_element(1, 1, -3.0)));
    p.add_eq("r = 1", p.expr(r).add_constant(&DMatrix::from_element(1, 1, -1.0)));
    let d = LinExpr::block_diag(&[p.expr(q), p.expr(r)]);
    let eye = DMatrix::identity(2, 2);
    let a_eye = LinExpr {
        constant: DMatrix::zeros(2, 2),
        terms: p.expr(alpha).terms.keys().map(|&k| (k, eye.clone())).collect(),
    };
    p.add_psd("lower", d.add_constant(&-&eye));
    p.add_psd("upper", &a_eye - &d);
    p.minimize(p.expr(alpha));
    let sol = solve_sdp(&p);
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.scalar("alpha") - 3.0).abs() < 1e-7, "{}", sol.scalar("alpha"));
    assert!(check_solution(&p, &sol, SDP_TOL).passed);
}

#[test]
fn two_by_two_boundary() {
    let mut p = SdpProblem::new();
    let t = p.add_var("t", VarKind::Scalar);
    let te = p.expr(t);
    let m = LinExpr {
        constant: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        terms: te.terms.keys().map(|&k| (k, DMatrix::identity(2, 2))).collect(),
    };
    p.add_psd("[[t,1],[1,t]]", m);
    p.minimize(te);
    let sol = solve_sdp(&p);
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.scalar("t") - 1.0).abs() < 1e-7);
    assert!(check_solution(&p, &sol, SDP_TOL).passed);
}

#[test]
fn infeasible_problem_is_detected_with_measure() {
    // X ⪰ 0 with tr X = −1.
    let mut p = SdpProblem::new();
    let x = p.add_var("X", VarKind::Symmetric(2));
    let xe = p.expr(x);
    p.add_psd("X", xe.clone());
    p.add_eq("trace", xe.trace().add_constant(&DMatrix::from_element(1, 1, 1.0)));
    p.minimize(xe.entry(0, 0));
    let sol = solve_sdp(&p);
    assert_eq!(sol.status, SdpStatus::Infeasible);
    // The smallest uniform shift that admits tr X = −1 is t = 1/2.
    let m = sol.infeasibility.unwrap();
    assert!((m - 0.5).abs() < 1e-6, "{m}");
}

#[test]
fn inconsistent_equalities_are_infeasible() {
    let mut p = SdpProblem::new();
    let x = p.add_var("x", VarKind::Scalar);
    p.add_eq("x = 1", p.expr(x).add_constant(&DMatrix::from_element(1, 1, -1.0)));
    p.add_eq("x = 2", p.expr(x).add_constant(&DMatrix::from_element(1, 1, -2.0)));
    p.minimize(p.expr(x));
    let sol = solve_sdp(&p);
    assert_eq!(sol.status, SdpStatus::Infeasible);
    assert!(sol.infeasibility.unwrap() > 0.1);
}

#[test]
fn unbounded_problem_is_detected() {
    let mut p = SdpProblem::new();
    let x = p.add_var("x", VarKind::Scalar);
    p.add_ge("x <= 1", -p.expr(x), -1.0);
    p.minimize(p.expr(x));
    assert_eq!(solve_sdp(&p).status, SdpStatus::Unbounded);
}

#[test]
fn diagonal_lower_bounds_hold() {
    let mut p = SdpProblem::new();
    let w = p.add_var_bounded("w", VarKind::Diagonal(2), Some(0.25));
    p.minimize(p.expr(w).trace());
    let sol = solve_sdp(&p);
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.objective_value - 0.5).abs() < 1e-7);
}

#[test]
fn adding_a_constraint_never_improves_the_optimum() {
    for (c, _) in ORACLE_CASES {
        let base = solve_sdp(&oracle_problem(&c));
        let mut tighter = oracle_problem(&c);
        let x = tighter.vars()[0].clone();
        let z0 = tighter.value(&x, &DVector::from_vec(vec![1.0, 0.0, 0.0]));
        assert_eq!(z0[(0, 0)], 1.0);
        let mut extra = LinExpr::zeros(1, 1);
        extra.terms.insert(0, DMatrix::from_element(1, 1, -1.0));
        extra.terms.insert(1, DMatrix::from_element(1, 1, -1.0));
        tighter.add_ge("z0 + z1 <= 0.5", extra, -0.5);
        let sol = solve_sdp(&tighter);
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(sol.objective_value >= base.objective_value - SDP_TOL);
    }
}

#[test]
fn repeated_solves_are_bitwise_identical() {
    let p = oracle_problem(&ORACLE_CASES[0].0);
    let a = solve_sdp(&p);
    let b = solve_sdp(&p);
    assert_eq!(a.x.as_slice(), b.x.as_slice());
    assert_eq!(a.objective_value.to_bits(), b.objective_value.to_bits());
}

#[test]
fn dump_lists_every_constraint() {
    let p = oracle_problem(&ORACLE_CASES[0].0);
    let text = p.dump();
    assert!(text.starts_with("sdp-problem v1"));
    assert_eq!(text.matches("\nge ").count(), 6);
    assert_eq!(text.matches("\npsd ").count(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Random strictly feasible LMIs with box bounds: the solver reaches
    /// optimality and its answer passes the independent checker.
    #[test]
    fn random_problems_pass_the_checker(
        entries in prop::collection::vec(-1.0f64..1.0, 3 * 6),
        c in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let sym = |v: &[f64]| mat3([v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5]]);
        let mut p = SdpProblem::new();
        let mut lmi = LinExpr::constant(DMatrix::identity(3, 3));
        let mut obj = LinExpr::zeros(1, 1);
        for k in 0..3 {
            let z = p.add_var(&format!("z{k}"), VarKind::Scalar);
            let e = p.expr(z);
            lmi = lmi + LinExpr {
                constant: DMatrix::zeros(3, 3),
                terms: e.terms.keys().map(|&i| (i, sym(&entries[6 * k..6 * k + 6]))).collect(),
            };
            obj = obj + e.scale(c[k]);
            p.add_ge("upper", -&e, -2.0);
            p.add_ge("lower", e, -2.0);
        }
        p.add_psd("lmi", lmi);
        p.minimize(obj);
        let sol = solve_sdp(&p);
        prop_assert_eq!(sol.status, SdpStatus::Optimal);
        let report = check_solution(&p, &sol, SDP_TOL);
        prop_assert!(report.passed, "{:?}", report);
    }
}
