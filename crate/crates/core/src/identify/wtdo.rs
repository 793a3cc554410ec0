//! Trajectory-dependent identification: the sign agreement of the input
//! gradients is imposed only at the samples bracketing the zero crossings of
//! each player's gradient along an observed equilibrium trajectory.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{assemble_potential, declare_potential, riccati_expr};
use crate::error::{Error, Result};
use crate::game::{LqGame, Method, PotentialFunction};
use crate::riccati::NeSolution;
use crate::sdp::solver::{solve_sdp, SdpSolution, SdpStatus};
use crate::sdp::{LinExpr, SdpProblem, VarKind};
use crate::sim::Trajectory;

/// Crossings whose bracketing magnitudes are both below this fraction of the
/// channel's peak magnitude are treated as noise and dropped.
pub const CHATTER_REL_TOL: f64 = 1e-7;

/// Slack granted to `|η|` in the tie-breaking second phase, relative to
/// `1 + |η|*`.
pub const PHASE2_SLACK: f64 = 1e-7;

/// A sign change of `[B⁽ⁱ⁾ᵀP⁽ⁱ⁾x]ⱼ` between two consecutive samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingPoint {
    pub player: usize,
    pub channel: usize,
    pub t_minus: f64,
    pub t_plus: f64,
    pub x_minus: DVector<f64>,
    pub x_plus: DVector<f64>,
    /// Sign of the signal at `t_plus`.
    pub sign_plus: f64,
}

/// One crossing per sign change of each gradient channel along the
/// trajectory, taken from the samples as given (no filtering of noise).
pub fn extract_crossings(game: &LqGame, ne: &NeSolution, traj: &Trajectory) -> Vec<CrossingPoint> {
    let mut out = Vec::new();
    for (i, b) in game.dynamics.b.iter().enumerate() {
        let v = b.transpose() * &ne.p[i];
        for j in 0..v.nrows() {
            let row = v.row(j);
            let s: Vec<f64> = traj.x.iter().map(|x| row.dot(&x.transpose())).collect();
            let tol = CHATTER_REL_TOL * s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for k in 0..s.len().saturating_sub(1) {
                let (a, c) = (s[k], s[k + 1]);
                if a * c < 0.0 && !(a.abs() < tol && c.abs() < tol) {
                    out.push(CrossingPoint {
                        player: i,
                        channel: j,
                        t_minus: traj.time(k),
                        t_plus: traj.time(k + 1),
                        x_minus: traj.x[k].clone(),
                        x_plus: traj.x[k + 1].clone(),
                        sign_plus: c.signum(),
                    });
                }
            }
        }
    }
    out
}

/// The symmetric-vector of a square expression as a column expression
/// (lower triangle, off-diagonal entries scaled by √2), so its Euclidean
/// norm is the Frobenius norm of the matrix.
fn svec_expr(e: &LinExpr) -> LinExpr {
    let d = e.shape().0;
    let mut parts = Vec::new();
    for j in 0..d {
        for i in j..d {
            let entry = e.entry(i, j);
            parts.push(if i == j { entry } else { entry.scale(std::f64::consts::SQRT_2) });
        }
    }
    LinExpr::vstack(&parts)
}

fn column(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

struct Program {
    problem: SdpProblem,
    eta: LinExpr,
    residual: LinExpr,
}

fn base_program(game: &LqGame, ne: &NeSolution, crossings: &[CrossingPoint]) -> Program {
    let kp = ne.stacked_gain();
    let mut problem = SdpProblem::new();
    let vars = declare_potential(&mut problem, game, &kp);
    let residual = riccati_expr(&problem, game, &vars, &kp);
    let eta = residual.trace();
    let p = problem.expr(vars.pp);
    for (c, cp) in crossings.iter().enumerate() {
        let b = &game.dynamics.b[cp.player];
        let row = p.lmul(&DMatrix::from_row_slice(1, b.nrows(), b.column(cp.channel).as_slice()));
        problem.add_strict(
            &format!("crossing {c} after"),
            row.rmul(&column(&cp.x_plus)).scale(cp.sign_plus),
        );
        problem.add_strict(
            &format!("crossing {c} before"),
            row.rmul(&column(&cp.x_minus)).scale(-cp.sign_plus),
        );
    }
    Program {
        problem,
        eta,
        residual,
    }
}

/// Adds `s ≥ |η|` and returns `s`. Minimizing `s` minimizes `|η|`, which has
/// the same minimizer as `η²` while keeping the objective linear.
fn bound_abs(program: &mut Program) -> LinExpr {
    let s = program.problem.add_var("s", VarKind::Scalar);
    let s = program.problem.expr(s);
    program.problem.add_ge("eta upper", &s - &program.eta, 0.0);
    program.problem.add_ge("eta lower", &s + &program.eta, 0.0);
    s
}

/// Phase one minimizes `|η|` with `η = tr(AᵀPᵖ + PᵖA − PᵖBKᵖ + Qᵖ)`.
pub fn build_wtdo(game: &LqGame, ne: &NeSolution, crossings: &[CrossingPoint]) -> SdpProblem {
    let mut program = base_program(game, ne, crossings);
    let s = bound_abs(&mut program);
    program.problem.minimize(s);
    program.problem
}

/// Phase two keeps `|η|` within [`PHASE2_SLACK`] of the phase-one optimum
/// and picks the point with the smallest Frobenius norm of the full Riccati
/// residual matrix, whose trace alone phase one controls.
fn build_phase2(game: &LqGame, ne: &NeSolution, crossings: &[CrossingPoint], eta_star: f64) -> Program {
    let mut program = base_program(game, ne, crossings);
    let s = bound_abs(&mut program);
    program
        .problem
        .add_ge("eta optimal face", -s, -(eta_star + PHASE2_SLACK * (1.0 + eta_star)));
    let t = program.problem.add_var("t", VarKind::Scalar);
    let t = program.problem.expr(t);
    let e = svec_expr(&program.residual);
    let d = e.shape().0;
    let arrow = LinExpr::vstack(&[
        LinExpr::hstack(&[t.times_matrix(&DMatrix::identity(d, d)), e.clone()]),
        LinExpr::hstack(&[e.transpose(), t.clone()]),
    ]);
    program.problem.add_psd("residual norm epigraph", arrow);
    program.problem.minimize(t);
    program
}

fn finish(game: &LqGame, program: &Program, sol: &SdpSolution) -> Result<PotentialFunction> {
    let mut pot = assemble_potential(game, sol.value("Pp"), sol.value("Qp"), sol.value("Rp"), Method::Wtdo)?;
    pot.objective = Some(program.eta.eval_scalar(&sol.x).abs());
    Ok(pot)
}

/// Solves the trajectory-dependent program. Among the points minimizing
/// `|η|`, the one with the smallest Riccati residual norm is returned; if
/// that refinement fails, the phase-one point is returned instead.
pub fn solve_wtdo(game: &LqGame, ne: &NeSolution, crossings: &[CrossingPoint]) -> Result<PotentialFunction> {
    let mut phase1 = base_program(game, ne, crossings);
    let s = bound_abs(&mut phase1);
    phase1.problem.minimize(s);
    let sol1 = solve_sdp(&phase1.problem);
    match sol1.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible => {
            return Err(Error::InfeasibleWtdo {
                measure: sol1.infeasibility.unwrap_or(f64::NAN),
            })
        }
        status => return Err(Error::SolverFailure(format!("trajectory-dependent program ended with {status:?}"))),
    }
    let eta_star = sol1.objective_value.max(0.0);
    let phase2 = build_phase2(game, ne, crossings, eta_star);
    let sol2 = solve_sdp(&phase2.problem);
    if sol2.status == SdpStatus::Optimal {
        finish(game, &phase2, &sol2)
    } else {
        finish(game, &phase1, &sol1)
    }
}
