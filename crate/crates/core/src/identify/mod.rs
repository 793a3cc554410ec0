//! Identification of quadratic ordinal potential functions from a solved game.

pub mod ido;
pub mod tfo;
pub mod wtdo;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::game::{stack_input_matrix, LqGame, Method, PotentialFunction};
use crate::linalg::symmetrize;
use crate::sdp::{LinExpr, SdpProblem, Var};

/// The decision variables shared by the trajectory-free and trajectory-dependent
/// programs, with their basic constraints already attached.
pub(crate) struct PotentialVars {
    pub pp: Var,
    pub qp: Var,
    pub rp: Var,
}

/// Declares `Pᵖ`, `Qᵖ`, `Rᵖ` and imposes `BᵀPᵖ = RᵖKᵖ`, `Pᵖ ⪰ 0` and
/// `blkdiag(Qᵖ, Rᵖ) ⪰ I`.
pub(crate) fn declare_potential(problem: &mut SdpProblem, game: &LqGame, kp: &DMatrix<f64>) -> PotentialVars {
    use crate::sdp::VarKind::Symmetric;
    let n = game.n();
    let m = game.total_inputs();
    let b = stack_input_matrix(&game.dynamics);
    let pp = problem.add_var("Pp", Symmetric(n));
    let qp = problem.add_var("Qp", Symmetric(n));
    let rp = problem.add_var("Rp", Symmetric(m));
    let (p, q, r) = (problem.expr(pp), problem.expr(qp), problem.expr(rp));
    problem.add_eq("gain consistency", p.lmul(&b.transpose()) - r.rmul(kp));
    problem.add_psd("Pp nonnegative", p);
    problem.add_psd(
        "cost floor",
        LinExpr::block_diag(&[q, r]).add_constant(&-DMatrix::identity(n + m, n + m)),
    );
    PotentialVars { pp, qp, rp }
}

/// `AᵀPᵖ + PᵖA − sym(PᵖBKᵖ) + Qᵖ` as an expression.
pub(crate) fn riccati_expr(problem: &SdpProblem, game: &LqGame, vars: &PotentialVars, kp: &DMatrix<f64>) -> LinExpr {
    let a = &game.dynamics.a;
    let bk = stack_input_matrix(&game.dynamics) * kp;
    let p = problem.expr(vars.pp);
    p.lmul(&a.transpose()) + p.rmul(a) - p.rmul(&bk).sym() + problem.expr(vars.qp)
}

/// Assembles a potential function from solved matrices, deriving the gain
/// from the identified cost as `Kᵖ = Rᵖ⁻¹BᵀPᵖ`.
pub(crate) fn assemble_potential(
    game: &LqGame,
    pp: &DMatrix<f64>,
    qp: &DMatrix<f64>,
    rp: &DMatrix<f64>,
    method: Method,
) -> Result<PotentialFunction> {
    let (pp, qp, rp) = (symmetrize(pp), symmetrize(qp), symmetrize(rp));
    let b = stack_input_matrix(&game.dynamics);
    let chol = rp
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SolverFailure("identified Rp is not positive definite".into()))?;
    let kp = chol.solve(&(b.transpose() * &pp));
    Ok(PotentialFunction {
        qp,
        rp,
        pp,
        kp,
        omega: None,
        alpha: None,
        method,
        objective: None,
    })
}
