//! Independent re-substitution check of SDP results.
//!
//! Works from the declared expressions of the problem, not from the conic
//! form the solver iterates on, so a bug in compilation or elimination shows
//! up here.

use nalgebra::DVector;

use super::{SdpProblem, SdpSolution};
use crate::linalg::{max_abs, min_eigenvalue};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    /// Largest absolute entry over all equality expressions.
    pub max_equality_violation: f64,
    /// Smallest eigenvalue over all PSD blocks (`+∞` if there are none).
    pub min_psd_eigenvalue: f64,
    /// Smallest `expr − bound` over margins and variable bounds.
    pub min_margin_slack: f64,
    /// Objective recomputed from the variable values.
    pub objective: f64,
    pub passed: bool,
}

/// Re-evaluates every constraint at the returned point. Passes when
/// equalities hold within `tol`, PSD blocks have `λ_min ≥ −tol`, margins hold
/// within `tol`, and the reported objective matches the recomputed one.
pub fn check_solution(problem: &SdpProblem, solution: &SdpSolution, tol: f64) -> CheckReport {
    let x = rebuild_unknowns(problem, solution);
    let max_equality_violation = problem
        .equalities()
        .iter()
        .map(|c| max_abs(&c.expr.eval(&x)))
        .fold(0.0, f64::max);
    let min_psd_eigenvalue = problem
        .psd_blocks()
        .iter()
        .map(|c| min_eigenvalue(&c.expr.eval(&x)))
        .fold(f64::INFINITY, f64::min);
    let min_margin_slack = problem
        .bound_margins()
        .iter()
        .chain(problem.margins())
        .map(|m| m.expr.eval_scalar(&x) - m.bound)
        .fold(f64::INFINITY, f64::min);
    let objective = problem.objective().eval_scalar(&x);
    let objective_ok = (objective - solution.objective_value).abs() <= tol * (1.0 + objective.abs());
    let passed = max_equality_violation <= tol
        && min_psd_eigenvalue >= -tol
        && min_margin_slack >= -tol
        && objective_ok
        && x.iter().all(|v| v.is_finite());
    CheckReport {
        max_equality_violation,
        min_psd_eigenvalue,
        min_margin_slack,
        objective,
        passed,
    }
}

/// Reads the scalar unknowns back from the named values rather than trusting
/// the solver's internal vector.
fn rebuild_unknowns(problem: &SdpProblem, solution: &SdpSolution) -> DVector<f64> {
    let mut x = DVector::zeros(problem.num_scalars());
    for decl in problem.vars() {
        let Some(m) = solution.values.get(&decl.name) else {
            x.fill(f64::NAN);
            return x;
        };
        let mut k = decl.offset;
        match decl.kind {
            super::VarKind::Scalar => {
                x[k] = m[(0, 0)];
            }
            super::VarKind::Diagonal(d) => {
                for i in 0..d {
                    x[k + i] = m[(i, i)];
                }
            }
            super::VarKind::Symmetric(d) => {
                for j in 0..d {
                    for i in 0..=j {
                        x[k] = 0.5 * (m[(i, j)] + m[(j, i)]);
                        k += 1;
                    }
                }
            }
        }
    }
    x
}
