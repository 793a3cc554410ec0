//! Trajectory-free identification: a semidefinite program whose feasible set
//! forces the potential's input gradients to be positive diagonal rescalings
//! of each player's own gradients, for every state.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{assemble_potential, declare_potential, riccati_expr};
use crate::error::{Error, Result};
use crate::game::{LqGame, Method, PotentialFunction};
use crate::linalg::{kron, rank, vec};
use crate::riccati::NeSolution;
use crate::sdp::solver::{solve_sdp, SdpStatus};
use crate::sdp::{LinExpr, SdpProblem, VarKind, EPS_STRICT};

/// Relative singular-value threshold for the rank computations.
pub const RANK_TOL: f64 = 1e-9;

/// Outcome of the dimension and rank pre-check. Advisory only: it never
/// prevents [`solve_tfo`] from running.
#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    /// Per player: the columns of `B⁽ⁱ⁾` are linearly independent.
    pub condition_a: Vec<bool>,
    /// `½(1+n) − Σᵢ pᵢ`.
    pub condition_b_value: f64,
    /// `condition_b_value > 0`.
    pub condition_b: bool,
    /// Per player: `rank(Eₙ ⊗ B⁽ⁱ⁾ᵀ)` and the rank of that matrix augmented
    /// with `vec(B⁽ⁱ⁾ᵀP⁽ⁱ⁾)`, the right-hand side at unit scaling.
    pub consistency_ranks: Vec<(usize, usize)>,
    /// `"likely-infeasible"` or `"necessary-conditions-met"`.
    pub advisory: String,
    /// The dimension count is only established for two players; for more
    /// players it is a generalization.
    pub extrapolated: bool,
}

/// Evaluates the necessary dimension and rank conditions for the
/// trajectory-free program.
pub fn check_feasibility(game: &LqGame, ne: &NeSolution) -> FeasibilityReport {
    let n = game.n();
    let eye = DMatrix::identity(n, n);
    let mut condition_a = Vec::new();
    let mut consistency_ranks = Vec::new();
    for (i, b) in game.dynamics.b.iter().enumerate() {
        condition_a.push(rank(b, RANK_TOL) == b.ncols());
        let coeff = kron(&eye, &b.transpose());
        let rhs = vec(&(b.transpose() * &ne.p[i]));
        let mut augmented = coeff.clone().insert_column(coeff.ncols(), 0.0);
        augmented.set_column(coeff.ncols(), &rhs);
        consistency_ranks.push((rank(&coeff, RANK_TOL), rank(&augmented, RANK_TOL)));
    }
    let condition_b_value = 0.5 * (1.0 + n as f64) - game.total_inputs() as f64;
    let condition_b = condition_b_value > 0.0;
    let advisory = if condition_a.iter().all(|&c| c) && condition_b {
        "necessary-conditions-met"
    } else {
        "likely-infeasible"
    };
    FeasibilityReport {
        condition_a,
        condition_b_value,
        condition_b,
        consistency_ranks,
        advisory: advisory.to_string(),
        extrapolated: game.num_players() > 2,
    }
}

/// Builds the trajectory-free program for the stacked equilibrium gain.
pub fn build_tfo(game: &LqGame, ne: &NeSolution) -> SdpProblem {
    let n = game.n();
    let m = game.total_inputs();
    let kp = ne.stacked_gain();
    let mut problem = SdpProblem::new();
    let vars = declare_potential(&mut problem, game, &kp);
    let alpha = problem.add_var("alpha", VarKind::Scalar);
    let e = riccati_expr(&problem, game, &vars, &kp);
    problem.add_eq("potential Riccati", e);
    let p = problem.expr(vars.pp);
    for (i, b) in game.dynamics.b.iter().enumerate() {
        let w = problem.add_var_bounded(&format!("omega{}", i + 1), VarKind::Diagonal(b.ncols()), Some(EPS_STRICT));
        let v = b.transpose() * &ne.p[i];
        problem.add_eq(
            &format!("gradient scaling, player {}", i + 1),
            problem.expr(w).rmul(&v) - p.lmul(&b.transpose()),
        );
    }
    let a = problem.expr(alpha);
    let blk = LinExpr::block_diag(&[problem.expr(vars.qp), problem.expr(vars.rp)]);
    problem.add_psd("condition bound", a.times_matrix(&DMatrix::identity(n + m, n + m)) - blk);
    // Minimizing α rather than α²: the cost floor forces α ≥ 1 > 0, so both
    // objectives share the minimizer and this one stays linear.
    problem.minimize(a);
    problem
}

/// Solves the trajectory-free program. Infeasibility is reported together with
/// the pre-check and the solver's violation measure; it does not prove that
/// the game has no ordinal potential.
pub fn solve_tfo(game: &LqGame, ne: &NeSolution) -> Result<PotentialFunction> {
    let problem = build_tfo(game, ne);
    let sol = solve_sdp(&problem);
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible => {
            return Err(Error::InfeasibleTfo {
                report: Box::new(check_feasibility(game, ne)),
                measure: sol.infeasibility.unwrap_or(f64::NAN),
            })
        }
        status => return Err(Error::SolverFailure(format!("trajectory-free program ended with {status:?}"))),
    }
    let mut pot = assemble_potential(game, sol.value("Pp"), sol.value("Qp"), sol.value("Rp"), Method::Tfo)?;
    pot.omega = Some(
        (0..game.num_players())
            .map(|i| sol.value(&format!("omega{}", i + 1)).diagonal())
            .collect(),
    );
    pot.alpha = Some(sol.scalar("alpha"));
    pot.objective = Some(sol.objective_value);
    Ok(pot)
}
