//! End-to-end identification pipelines and the noise-robustness sweep.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::game::{stack_input_matrix, LqGame, Method, PotentialFunction};
use crate::identify::ido::{solve_ido, IdoConfig};
use crate::identify::tfo::{solve_tfo, FeasibilityReport};
use crate::identify::wtdo::{extract_crossings, solve_wtdo};
use crate::riccati::{solve_coupled_are, solve_single_are, NeSolution};
use crate::sim::{add_noise, default_horizon, simulate_closed_loop, split_gain, trajectory_error, Trajectory, DEFAULT_STEP};
use crate::verify::{verify_opdg, VerificationReport};

/// Signal-to-noise ratios of the robustness sweep, in dB.
pub const SWEEP_SNRS: [f64; 4] = [10.0, 20.0, 30.0, 40.0];
/// Default number of noise realizations per SNR level.
pub const DEFAULT_SEEDS: usize = 11;

/// A solved game with its equilibrium trajectory.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub game: LqGame,
    pub ne: NeSolution,
    pub traj: Trajectory,
    pub horizon: f64,
    pub step: f64,
}

impl Baseline {
    /// Solves the equilibrium and simulates it with the default horizon and
    /// step.
    pub fn new(game: LqGame) -> Result<Self> {
        let ne = solve_coupled_are(&game)?;
        let horizon = default_horizon(&game, &ne.k);
        Self::with_grid(game, ne, horizon, DEFAULT_STEP)
    }

    pub fn with_grid(game: LqGame, ne: NeSolution, horizon: f64, step: f64) -> Result<Self> {
        let traj = simulate_closed_loop(&game, &ne.k, horizon, step)?;
        Ok(Baseline {
            game,
            ne,
            traj,
            horizon,
            step,
        })
    }

    /// Closed loop of the potential's own optimal controller on the baseline
    /// grid.
    pub fn potential_trajectory(&self, pot: &PotentialFunction) -> Result<Trajectory> {
        let b = stack_input_matrix(&self.game.dynamics);
        let (_, k) = solve_single_are(&self.game.dynamics.a, &b, &pot.qp, &pot.rp)?;
        simulate_closed_loop(&self.game, &split_gain(&self.game, &k), self.horizon, self.step)
    }
}

/// Measurement noise applied to the trajectory a method observes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Noise {
    pub snr_db: f64,
    pub seed: u64,
}

/// Outcome of one identification run.
#[derive(Debug, Clone)]
pub struct IdentReport {
    pub method: Method,
    pub feasible: bool,
    /// Trajectory error of the potential's closed loop against the noise-free
    /// equilibrium trajectory; absent when infeasible.
    pub e_x: Option<f64>,
    /// Time spent in the identification itself.
    pub wall_time_seconds: f64,
    pub potential: Option<PotentialFunction>,
    /// Sign-condition check on the noise-free equilibrium trajectory.
    pub verification: Option<VerificationReport>,
    pub feasibility: Option<FeasibilityReport>,
    pub noise: Option<Noise>,
    pub error: Option<String>,
}

impl IdentReport {
    pub fn to_json(&self) -> Value {
        json!({
            "method": self.method,
            "feasible": self.feasible,
            "e_x": self.e_x,
            "wall_time_seconds": self.wall_time_seconds,
            "potential": self.potential.as_ref().map(|p| serde_json::from_str::<Value>(&p.to_json()).expect("potential JSON is valid")),
            "verification": self.verification,
            "feasibility": self.feasibility,
            "noise": self.noise,
            "error": self.error,
        })
    }
}

/// Runs one identification method on the baseline. Infeasibility is reported
/// in the returned report; other failures are errors.
pub fn identify(base: &Baseline, method: Method, noise: Option<Noise>, ido: &IdoConfig) -> Result<IdentReport> {
    let observed = match noise {
        Some(n) => add_noise(&base.traj, n.snr_db, n.seed),
        None => base.traj.clone(),
    };
    let start = Instant::now();
    let outcome = match method {
        Method::Tfo => solve_tfo(&base.game, &base.ne),
        Method::Wtdo => {
            let crossings = extract_crossings(&base.game, &base.ne, &observed);
            solve_wtdo(&base.game, &base.ne, &crossings)
        }
        Method::Ido => solve_ido(&base.game, &base.ne, &observed, ido).map(|o| o.potential),
    };
    let wall_time_seconds = start.elapsed().as_secs_f64();
    let mut report = IdentReport {
        method,
        feasible: false,
        e_x: None,
        wall_time_seconds,
        potential: None,
        verification: None,
        feasibility: None,
        noise,
        error: None,
    };
    match outcome {
        Ok(pot) => {
            let traj_p = base.potential_trajectory(&pot)?;
            report.e_x = Some(trajectory_error(&traj_p, &base.traj)?.value);
            report.verification = Some(verify_opdg(&base.game, &base.ne, &pot, &base.traj));
            report.feasible = true;
            report.potential = Some(pot);
        }
        Err(Error::InfeasibleTfo { report: feasibility, measure }) => {
            report.error = Some(format!("infeasible (violation measure {measure:.3e})"));
            report.feasibility = Some(*feasibility);
        }
        Err(Error::InfeasibleWtdo { measure }) => {
            report.error = Some(format!("infeasible (violation measure {measure:.3e})"));
        }
        Err(e) => return Err(e),
    }
    Ok(report)
}

/// Error statistics of one method at one SNR level.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub method: Method,
    pub snr_db: f64,
    /// Per-seed errors; `None` where the run was infeasible or failed.
    pub e_x: Vec<Option<f64>>,
    /// Median over the successful runs.
    pub median: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

/// Runs every method at every SNR level for seeds `0..seeds`, concurrently.
/// Seed `k` produces the same underlying noise sequence at every SNR level,
/// scaled to the level's power.
pub fn noise_sweep(base: &Baseline, methods: &[Method], snrs: &[f64], seeds: usize, ido: &IdoConfig) -> Vec<SweepCell> {
    let jobs: Vec<(Method, f64, u64)> = methods
        .iter()
        .flat_map(|&m| snrs.iter().flat_map(move |&s| (0..seeds as u64).map(move |k| (m, s, k))))
        .collect();
    let results: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(method, snr_db, seed)| {
            identify(base, method, Some(Noise { snr_db, seed }), ido)
                .ok()
                .and_then(|r| r.e_x)
        })
        .collect();
    let mut cells = Vec::new();
    for (chunk, jobs) in results.chunks(seeds.max(1)).zip(jobs.chunks(seeds.max(1))) {
        let ok: Vec<f64> = chunk.iter().flatten().copied().collect();
        cells.push(SweepCell {
            method: jobs[0].0,
            snr_db: jobs[0].1,
            e_x: chunk.to_vec(),
            median: median(&ok),
            min: ok.iter().copied().reduce(f64::min),
            max: ok.iter().copied().reduce(f64::max),
        });
    }
    cells
}
