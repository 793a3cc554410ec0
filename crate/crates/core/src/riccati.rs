//! Algebraic Riccati equations: the single-agent equation and the coupled
//! system whose solution gives the feedback Nash equilibrium.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{stack_input_matrix, LqGame};
use crate::linalg::{
    block_diag, is_stabilizable, lstsq, matrix_sign, solve_lyapunov, spectral_abscissa, symmetrize, vstack,
};

/// Frobenius tolerance on Riccati residuals.
pub const RICCATI_TOL: f64 = 1e-9;
/// Iteration cap for Newton steps and coupled sweeps.
pub const MAX_ITER: usize = 500;
/// A closed loop is accepted as Hurwitz when its spectral abscissa is below
/// this value.
pub const HURWITZ_TOL: f64 = -1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct NeSolution {
    #[serde(skip)]
    pub p: Vec<DMatrix<f64>>,
    #[serde(skip)]
    pub k: Vec<DMatrix<f64>>,
    pub residual: f64,
    pub iterations: usize,
}

impl NeSolution {
    /// Row stack `[K⁽¹⁾; …; K⁽ᴺ⁾]`.
    pub fn stacked_gain(&self) -> DMatrix<f64> {
        vstack(&self.k)
    }
}

fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

fn are_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r_inv: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    let res = a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q;
    frobenius(&res)
}

fn check_are_inputs(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    let m = b.ncols();
    if !a.is_square() || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "A {}x{}, B {}x{}, Q {}x{}, R {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            q.nrows(),
            q.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    Ok(())
}

/// Stabilizing solution of `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` by the matrix sign
/// function of the Hamiltonian. Only used to produce an initial stabilizing
/// gain; it requires the Hamiltonian to have no imaginary-axis eigenvalues.
fn sign_function_are(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r_inv: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let s = b * r_inv * b.transpose();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    let w = matrix_sign(&h)?;
    let eye = DMatrix::<f64>::identity(n, n);
    let w11 = w.view((0, 0), (n, n)).into_owned();
    let w12 = w.view((0, n), (n, n)).into_owned();
    let w21 = w.view((n, 0), (n, n)).into_owned();
    let w22 = w.view((n, n), (n, n)).into_owned();
    // The stable invariant subspace is the kernel of W + I, spanned by
    // [I; P]; hence [W12; W22 + I] P = −[W11 + I; W21].
    let lhs = vstack(&[w12, w22 + &eye]);
    let rhs = -vstack(&[w11 + &eye, w21]);
    let p = lstsq(&lhs, &rhs)?;
    Some(symmetrize(&p))
}

/// Stabilizing solution of the single-agent algebraic Riccati equation.
///
/// Newton–Kleinman iteration on Lyapunov equations, started from the gain of
/// the stabilizing solution of the same equation with `Q + I`.
pub fn solve_single_are(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_are_inputs(a, b, q, r)?;
    let n = a.nrows();
    let r_chol = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SolverFailure("R is not positive definite".into()))?;
    let r_inv = r_chol.inverse();
    if !is_stabilizable(a, b) {
        return Err(Error::NotStabilizable("PBH rank test failed on an unstable eigenvalue".into()));
    }

    let gain = |p: &DMatrix<f64>| r_chol.solve(&(b.transpose() * p));

    let mut k = if spectral_abscissa(a) < HURWITZ_TOL {
        DMatrix::zeros(b.ncols(), n)
    } else {
        let q_shift = q + DMatrix::<f64>::identity(n, n);
        let p0 = sign_function_are(a, b, &q_shift, &r_inv)
            .ok_or_else(|| Error::SolverFailure("sign-function initialization failed".into()))?;
        gain(&p0)
    };
    if spectral_abscissa(&(a - b * &k)) >= HURWITZ_TOL {
        return Err(Error::SolverFailure("could not find an initial stabilizing gain".into()));
    }

    let mut best: Option<(f64, DMatrix<f64>)> = None;
    let mut stalled = 0;
    for it in 0..MAX_ITER {
        let acl = a - b * &k;
        let rhs = q + k.transpose() * r * &k;
        let p = solve_lyapunov(&acl, &rhs).ok_or_else(|| Error::SolverFailure("singular Lyapunov operator".into()))?;
        k = gain(&p);
        let residual = are_residual(a, b, q, &r_inv, &p);
        if !residual.is_finite() {
            return Err(Error::NoConvergence { residual, iterations: it + 1 });
        }
        let improved = best.as_ref().is_none_or(|(r0, _)| residual < 0.5 * *r0);
        if best.as_ref().is_none_or(|(r0, _)| residual < *r0) {
            best = Some((residual, p.clone()));
        }
        if residual < RICCATI_TOL * 1e-3 {
            break;
        }
        // Once quadratic convergence has reached rounding level the residual
        // stops shrinking; stop then rather than spinning to the cap.
        stalled = if improved { 0 } else { stalled + 1 };
        if stalled >= 3 {
            break;
        }
    }
    let (residual, p) = best.expect("at least one Newton step runs");
    if residual >= RICCATI_TOL {
        return Err(Error::NoConvergence { residual, iterations: MAX_ITER });
    }
    let k = gain(&p);
    if spectral_abscissa(&(a - b * &k)) >= HURWITZ_TOL {
        return Err(Error::NoConvergence { residual, iterations: MAX_ITER });
    }
    Ok((p, k))
}

/// Left-hand side of the coupled Riccati equation of player `i`:
/// `AᵀPᵢ + PᵢA + Qᵢ − Σⱼ (PᵢSⱼPⱼ + PⱼSⱼPᵢ) + Σⱼ PⱼSᵢⱼPⱼ`, with
/// `Sⱼ = BⱼRⱼⱼ⁻¹Bⱼᵀ` and `Sᵢⱼ = BⱼRⱼⱼ⁻¹RᵢⱼRⱼⱼ⁻¹Bⱼᵀ` (so `Sᵢᵢ = Sᵢ`).
pub fn coupled_residual_matrix(game: &LqGame, p: &[DMatrix<f64>], i: usize) -> DMatrix<f64> {
    let a = &game.dynamics.a;
    let mut res = a.transpose() * &p[i] + &p[i] * a + &game.costs[i].q;
    for j in 0..game.num_players() {
        let bj = &game.dynamics.b[j];
        let rjj_inv = game.r_own(j).clone().try_inverse().expect("validated R_jj is invertible");
        let sj = bj * &rjj_inv * bj.transpose();
        let sij = bj * &rjj_inv * &game.costs[i].r[j] * &rjj_inv * bj.transpose();
        res -= &p[i] * &sj * &p[j] + &p[j] * &sj * &p[i];
        res += &p[j] * sij * &p[j];
    }
    res
}

/// Maximum over players of the Frobenius norm of the coupled residual.
pub fn coupled_residual(game: &LqGame, p: &[DMatrix<f64>]) -> f64 {
    (0..game.num_players())
        .map(|i| frobenius(&coupled_residual_matrix(game, p, i)))
        .fold(0.0, f64::max)
}

fn gains_from(game: &LqGame, p: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    p.iter()
        .enumerate()
        .map(|(i, pi)| {
            let bi = &game.dynamics.b[i];
            game.r_own(i)
                .clone()
                .cholesky()
                .expect("validated R_ii is positive definite")
                .solve(&(bi.transpose() * pi))
        })
        .collect()
}

fn closed_loop(game: &LqGame, k: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut acl = game.dynamics.a.clone();
    for (b, ki) in game.dynamics.b.iter().zip(k) {
        acl -= b * ki;
    }
    acl
}

/// Initial stabilizing gains for the coupled iteration. Each player's own
/// optimal gain is used when every `(A, Bᵢ)` is stabilizable and the joint
/// closed loop is stable; otherwise the team-optimal gain of the stacked
/// system is split by rows.
fn initial_gains(game: &LqGame) -> Result<Vec<DMatrix<f64>>> {
    let a = &game.dynamics.a;
    let individual: Option<Vec<DMatrix<f64>>> = (0..game.num_players())
        .map(|i| {
            solve_single_are(a, &game.dynamics.b[i], &game.costs[i].q, game.r_own(i))
                .ok()
                .map(|(_, k)| k)
        })
        .collect();
    if let Some(k) = individual {
        if spectral_abscissa(&closed_loop(game, &k)) < HURWITZ_TOL {
            return Ok(k);
        }
    }
    let bp = stack_input_matrix(&game.dynamics);
    let q_sum = game.costs.iter().fold(DMatrix::zeros(game.n(), game.n()), |acc, c| acc + &c.q);
    let r_team = block_diag(&(0..game.num_players()).map(|i| game.r_own(i).clone()).collect::<Vec<_>>());
    let (_, k_team) = solve_single_are(a, &bp, &q_sum, &r_team)?;
    let mut out = Vec::with_capacity(game.num_players());
    for i in 0..game.num_players() {
        let off = game.input_offset(i);
        let p_i = game.dynamics.b[i].ncols();
        out.push(k_team.rows(off, p_i).into_owned());
    }
    Ok(out)
}

/// Feedback Nash equilibrium of the game by policy iteration.
///
/// Each sweep visits the players in order. Player `i` faces the closed loop
/// `A − Σⱼ≠ᵢ BⱼKⱼ` with state weight `Qᵢ + Σⱼ≠ᵢ KⱼᵀRᵢⱼKⱼ` and solves its own
/// Riccati equation. If a sweep increases the coupled residual the new
/// Riccati solutions are averaged with the previous ones.
pub fn solve_coupled_are(game: &LqGame) -> Result<NeSolution> {
    let violations = crate::game::validate_game(game);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let a = &game.dynamics.a;
    let b = &game.dynamics.b;
    let num = game.num_players();
    let n = game.n();
    if !is_stabilizable(a, &stack_input_matrix(&game.dynamics)) {
        return Err(Error::NotStabilizable("no joint input stabilizes the system".into()));
    }

    let mut k = initial_gains(game)?;
    let mut p = vec![DMatrix::zeros(n, n); num];
    let mut last_residual = f64::INFINITY;
    for sweep in 1..=MAX_ITER {
        let p_prev = p.clone();
        for i in 0..num {
            let mut a_i = a.clone();
            let mut q_i = game.costs[i].q.clone();
            for j in (0..num).filter(|&j| j != i) {
                a_i -= &b[j] * &k[j];
                q_i += k[j].transpose() * &game.costs[i].r[j] * &k[j];
            }
            let (p_i, k_i) = solve_single_are(&a_i, &b[i], &symmetrize(&q_i), game.r_own(i))?;
            p[i] = p_i;
            k[i] = k_i;
        }
        let mut residual = coupled_residual(game, &p);
        if residual > last_residual && sweep > 1 {
            let damped: Vec<_> = p.iter().zip(&p_prev).map(|(new, old)| (new + old) * 0.5).collect();
            let k_damped = gains_from(game, &damped);
            // Averaging can lose stability; the undamped sweep is kept then.
            if spectral_abscissa(&closed_loop(game, &k_damped)) < HURWITZ_TOL {
                p = damped;
                k = k_damped;
                residual = coupled_residual(game, &p);
            }
        }
        last_residual = residual;
        if !residual.is_finite() {
            return Err(Error::NoConvergence { residual, iterations: sweep });
        }
        if residual < RICCATI_TOL {
            if spectral_abscissa(&closed_loop(game, &k)) >= HURWITZ_TOL {
                return Err(Error::SolverFailure("equilibrium closed loop is not Hurwitz".into()));
            }
            return Ok(NeSolution {
                p,
                k,
                residual,
                iterations: sweep,
            });
        }
    }
    Err(Error::NoConvergence {
        residual: last_residual,
        iterations: MAX_ITER,
    })
}

/// Closed-loop matrix `A − Σᵢ BᵢKᵢ` of an equilibrium.
pub fn ne_closed_loop(game: &LqGame, ne: &NeSolution) -> DMatrix<f64> {
    closed_loop(game, &ne.k)
}
