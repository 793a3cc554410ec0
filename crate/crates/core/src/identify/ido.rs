//! Input-dependent identification baseline: a derivative-free search over
//! cost weights that matches the inputs the potential's optimal controller
//! would produce along an observed trajectory to the equilibrium inputs.

use std::cell::RefCell;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::game::{stack_input_matrix, LqGame, Method, PotentialFunction};
use crate::riccati::{solve_single_are, NeSolution};
use crate::sim::Trajectory;

/// Added to both factor products so iterates stay positive definite.
pub const FACTOR_FLOOR: f64 = 1e-9;
/// Cost assigned to candidates whose Riccati equation has no stabilizing
/// solution.
const REJECTED: f64 = 1e30;
/// Initial weights whose input error is below this fraction of the
/// equilibrium input energy, with no sign violation, are already optimal and
/// are returned without searching.
const OPTIMAL_REL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct IdoConfig {
    /// Nelder–Mead iterations per run; the search runs once and then restarts
    /// once from a perturbed best point.
    pub max_iterations: u64,
    /// Weight of the sign-condition hinge penalty relative to the normalized
    /// input error.
    pub penalty_weight: f64,
    /// Starting `(Qᵖ, Rᵖ)`; identity matrices when absent.
    pub init: Option<(DMatrix<f64>, DMatrix<f64>)>,
    /// Use every `sample_stride`-th sample of the trajectory grid.
    pub sample_stride: usize,
    /// Edge length of the initial simplex in factor coordinates.
    pub simplex_step: f64,
}

impl Default for IdoConfig {
    fn default() -> Self {
        IdoConfig {
            max_iterations: 4000,
            penalty_weight: 1e3,
            init: None,
            sample_stride: 1,
            simplex_step: 0.1,
        }
    }
}

impl IdoConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.max_iterations < 1 {
            out.push("max_iterations must be at least 1".into());
        }
        if !(self.penalty_weight > 0.0) {
            out.push("penalty_weight must be positive".into());
        }
        if self.sample_stride < 1 {
            out.push("sample_stride must be at least 1".into());
        }
        if !(self.simplex_step > 0.0) {
            out.push("simplex_step must be positive".into());
        }
        out
    }
}

/// Result of the baseline search.
#[derive(Debug, Clone)]
pub struct IdoOutcome {
    pub potential: PotentialFunction,
    /// Input error of the returned weights.
    pub input_error: f64,
    /// Normalized sign-condition violation summed over the used samples.
    pub hinge_violation: f64,
    pub samples: usize,
    pub evaluations: usize,
    /// Best penalized cost after each evaluation.
    pub best_history: Vec<f64>,
}

/// Trapezoid weights of a uniform grid.
fn trapezoid_weights(len: usize, step: f64) -> Vec<f64> {
    (0..len)
        .map(|k| if k == 0 || k + 1 == len { 0.5 * step } else { step })
        .collect()
}

/// `∫ |u⁽ᵖ⁾ − u|² dt` along the trajectory by the trapezoid rule, with
/// `u⁽ᵖ⁾ = −Kᵖx` from the candidate's Riccati equation and `u` the stacked
/// equilibrium feedback.
pub fn input_error(
    game: &LqGame,
    ne: &NeSolution,
    candidate: (&DMatrix<f64>, &DMatrix<f64>),
    traj: &Trajectory,
) -> Result<f64> {
    let b = stack_input_matrix(&game.dynamics);
    let (_, k) = solve_single_are(&game.dynamics.a, &b, candidate.0, candidate.1)?;
    let dk = k - ne.stacked_gain();
    let w = trapezoid_weights(traj.len(), traj.step);
    Ok(traj.x.iter().zip(&w).map(|(x, w)| w * (&dk * x).norm_squared()).sum())
}

fn tri_len(d: usize) -> usize {
    d * (d + 1) / 2
}

fn factor_to_params(l: &DMatrix<f64>, out: &mut Vec<f64>) {
    for i in 0..l.nrows() {
        for j in 0..=i {
            out.push(l[(i, j)]);
        }
    }
}

fn params_to_spd(z: &[f64], d: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in 0..=i {
            l[(i, j)] = z[k];
            k += 1;
        }
    }
    &l * l.transpose() + DMatrix::identity(d, d) * FACTOR_FLOOR
}

struct Objective<'a> {
    game: &'a LqGame,
    b: DMatrix<f64>,
    k_ne: DMatrix<f64>,
    /// `Σ_k w_k x_k x_kᵀ`, so that the input error is `tr(ΔK G ΔKᵀ)`.
    gram: DMatrix<f64>,
    /// Samples as columns.
    xs: DMatrix<f64>,
    /// `[B⁽ⁱ⁾ᵀP⁽ⁱ⁾]ᵢ xs` stacked over players, normalized by its peak.
    g_orig: DMatrix<f64>,
    error_scale: f64,
    penalty_weight: f64,
    evaluations: RefCell<usize>,
    history: RefCell<Vec<f64>>,
}

struct Evaluation {
    cost: f64,
    input_error: f64,
    hinge: f64,
    pp: DMatrix<f64>,
    qp: DMatrix<f64>,
    rp: DMatrix<f64>,
}

impl Objective<'_> {
    fn split(&self, z: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.game.n();
        let m = self.game.total_inputs();
        (params_to_spd(&z[..tri_len(n)], n), params_to_spd(&z[tri_len(n)..], m))
    }

    fn evaluate(&self, z: &[f64]) -> Option<Evaluation> {
        let (qp, rp) = self.split(z);
        let (pp, k) = solve_single_are(&self.game.dynamics.a, &self.b, &qp, &rp).ok()?;
        let dk = &k - &self.k_ne;
        let input_error = (&dk * &self.gram * dk.transpose()).trace();
        let bp = self.b.transpose() * &pp;
        let pot = bp * &self.xs;
        let peak = pot.amax();
        let hinge = if peak > 0.0 {
            pot.iter().zip(self.g_orig.iter()).map(|(a, b)| (-(a * b) / peak).max(0.0)).sum()
        } else {
            0.0
        };
        let cost = input_error / self.error_scale + self.penalty_weight * hinge / self.xs.ncols() as f64;
        Some(Evaluation {
            cost,
            input_error,
            hinge,
            pp,
            qp,
            rp,
        })
    }
}

/// Lets the executor borrow the objective so its counters stay readable.
struct Borrowed<'a, 'b>(&'a Objective<'b>);

impl CostFunction for Borrowed<'_, '_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, z: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let cost = self.0.evaluate(z).map_or(REJECTED, |e| e.cost);
        let cost = if cost.is_finite() { cost } else { REJECTED };
        *self.0.evaluations.borrow_mut() += 1;
        let mut history = self.0.history.borrow_mut();
        let best = history.last().copied().unwrap_or(f64::INFINITY).min(cost);
        history.push(best);
        Ok(cost)
    }
}

fn simplex(center: &[f64], step: f64) -> Vec<Vec<f64>> {
    let mut out = vec![center.to_vec()];
    for k in 0..center.len() {
        let mut v = center.to_vec();
        v[k] += step;
        out.push(v);
    }
    out
}

fn run(objective: &Objective<'_>, start: &[f64], step: f64, iterations: u64) -> Result<(Vec<f64>, f64)> {
    let solver = NelderMead::new(simplex(start, step))
        .with_sd_tolerance(1e-12)
        .map_err(|e| Error::SolverFailure(e.to_string()))?;
    let result = Executor::new(Borrowed(objective), solver)
        .configure(|state| state.max_iters(iterations))
        .run()
        .map_err(|e| Error::SolverFailure(e.to_string()))?;
    let best = result
        .state()
        .get_best_param()
        .cloned()
        .ok_or_else(|| Error::SolverFailure("Nelder–Mead returned no iterate".into()))?;
    Ok((best, result.state().get_best_cost()))
}

/// Minimizes the normalized input error plus a hinge penalty on sign
/// disagreement between the candidate's and the players' input gradients at
/// the trajectory samples. The candidate's Riccati equation is solved exactly
/// at every evaluation. The best iterate found is always returned.
pub fn solve_ido(game: &LqGame, ne: &NeSolution, traj: &Trajectory, cfg: &IdoConfig) -> Result<IdoOutcome> {
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let n = game.n();
    let m = game.total_inputs();
    let b = stack_input_matrix(&game.dynamics);
    let xs: Vec<DVector<f64>> = traj.x.iter().step_by(cfg.sample_stride).cloned().collect();
    if xs.is_empty() {
        return Err(Error::Validation(vec!["trajectory has no samples".into()]));
    }
    let w = trapezoid_weights(xs.len(), traj.step * cfg.sample_stride as f64);
    let gram = xs
        .iter()
        .zip(&w)
        .fold(DMatrix::zeros(n, n), |acc, (x, w)| acc + x * x.transpose() * *w);
    let own: DMatrix<f64> = crate::linalg::vstack(
        &game.dynamics.b.iter().zip(&ne.p).map(|(bi, pi)| bi.transpose() * pi).collect::<Vec<_>>(),
    );
    let xs = DMatrix::from_columns(&xs);
    let g_orig = &own * &xs;
    let g_orig = &g_orig / g_orig.amax().max(f64::MIN_POSITIVE);

    let (q0, r0) = cfg
        .init
        .clone()
        .unwrap_or_else(|| (DMatrix::identity(n, n), DMatrix::identity(m, m)));
    let mut start = Vec::with_capacity(tri_len(n) + tri_len(m));
    for (mat, name) in [(&q0, "Qp"), (&r0, "Rp")] {
        let shifted = mat - DMatrix::identity(mat.nrows(), mat.nrows()) * FACTOR_FLOOR;
        let l = shifted
            .cholesky()
            .ok_or_else(|| Error::Validation(vec![format!("initial {name} must be positive definite")]))?
            .l();
        factor_to_params(&l, &mut start);
    }

    let mut objective = Objective {
        game,
        b,
        k_ne: ne.stacked_gain(),
        gram,
        xs,
        g_orig,
        error_scale: 1.0,
        penalty_weight: cfg.penalty_weight,
        evaluations: RefCell::new(0),
        history: RefCell::new(Vec::new()),
    };
    let initial = objective
        .evaluate(&start)
        .ok_or_else(|| Error::SolverFailure("the initial weights have no stabilizing Riccati solution".into()))?;
    let k_ne = &objective.k_ne;
    let ne_energy = (k_ne * &objective.gram * k_ne.transpose()).trace();
    let already_optimal = initial.input_error <= OPTIMAL_REL * ne_energy && initial.hinge == 0.0;
    if initial.input_error > 0.0 {
        objective.error_scale = initial.input_error;
    }

    let mut best = start.clone();
    let mut best_cost = objective.evaluate(&start).map_or(REJECTED, |e| e.cost);
    if !already_optimal && best_cost > 0.0 {
        let (z1, c1) = run(&objective, &start, cfg.simplex_step, cfg.max_iterations)?;
        if c1 < best_cost {
            best = z1;
            best_cost = c1;
        }
        if best_cost > 0.0 {
            let (z2, c2) = run(&objective, &best, cfg.simplex_step * 0.5, cfg.max_iterations)?;
            if c2 < best_cost {
                best = z2;
            }
        }
    }

    let eval = objective
        .evaluate(&best)
        .ok_or_else(|| Error::SolverFailure("best iterate lost its stabilizing Riccati solution".into()))?;
    let kp = eval.rp.clone().cholesky().expect("factor floor keeps Rp definite").solve(&(objective.b.transpose() * &eval.pp));
    let samples = objective.xs.ncols();
    Ok(IdoOutcome {
        potential: PotentialFunction {
            qp: eval.qp,
            rp: eval.rp,
            pp: eval.pp,
            kp,
            omega: None,
            alpha: None,
            method: Method::Ido,
            objective: Some(eval.cost),
        },
        input_error: eval.input_error,
        hinge_violation: eval.hinge,
        samples,
        evaluations: objective.evaluations.into_inner(),
        best_history: objective.history.into_inner(),
    })
}
