//! Closed-loop simulation, measurement noise and the trajectory error metric.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::game::LqGame;
use crate::linalg::eigenvalues;

/// Default integration step.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Upper limit on the default horizon.
pub const MAX_HORIZON: f64 = 20.0;
/// Number of slowest time constants covered by the default horizon.
pub const HORIZON_TIME_CONSTANTS: f64 = 8.0;
/// State norm beyond which a simulation is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e9;

/// States and inputs sampled on the uniform grid `t₀ + k·step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub step: f64,
    pub x: Vec<DVector<f64>>,
    /// Per sample, one input vector per player.
    pub u: Vec<Vec<DVector<f64>>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.step
    }

    /// Writes the header `t,x1..xn,u1..um` followed by one row per sample,
    /// every number with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.x.first().map_or(0, |x| x.len());
        let m: usize = self.u.first().map_or(0, |u| u.iter().map(|v| v.len()).sum());
        let mut out = String::from("t");
        for i in 1..=n {
            write!(out, ",x{i}").unwrap();
        }
        for j in 1..=m {
            write!(out, ",u{j}").unwrap();
        }
        out.push('\n');
        for k in 0..self.len() {
            write!(out, "{:.16e}", self.time(k)).unwrap();
            for v in self.x[k].iter() {
                write!(out, ",{v:.16e}").unwrap();
            }
            for v in self.u.get(k).into_iter().flatten().flat_map(|u| u.iter()) {
                write!(out, ",{v:.16e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// `A − Σᵢ B⁽ⁱ⁾K⁽ⁱ⁾`.
pub fn closed_loop_matrix(game: &LqGame, gains: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut acl = game.dynamics.a.clone();
    for (b, k) in game.dynamics.b.iter().zip(gains) {
        acl -= b * k;
    }
    acl
}

/// Splits a row-stacked gain into per-player blocks.
pub fn split_gain(game: &LqGame, stacked: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    game.input_dims()
        .iter()
        .scan(0, |row, &p| {
            let block = stacked.rows(*row, p).into_owned();
            *row += p;
            Some(block)
        })
        .collect()
}

/// Horizon covering [`HORIZON_TIME_CONSTANTS`] time constants of the slowest
/// closed-loop mode, capped at [`MAX_HORIZON`].
pub fn default_horizon(game: &LqGame, gains: &[DMatrix<f64>]) -> f64 {
    let slowest = eigenvalues(&closed_loop_matrix(game, gains))
        .iter()
        .map(|l| l.re.abs())
        .fold(f64::INFINITY, f64::min);
    if slowest > 0.0 {
        (HORIZON_TIME_CONSTANTS / slowest).min(MAX_HORIZON)
    } else {
        MAX_HORIZON
    }
}

/// Integrates `ẋ = (A − ΣB⁽ⁱ⁾K⁽ⁱ⁾)x` from the game's initial state with the
/// classical fourth-order Runge–Kutta scheme. Inputs are recorded as
/// `u⁽ⁱ⁾ = −K⁽ⁱ⁾x` at every sample.
pub fn simulate_closed_loop(game: &LqGame, gains: &[DMatrix<f64>], horizon: f64, step: f64) -> Result<Trajectory> {
    if !(step > 0.0) || !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::Validation(vec![format!(
            "simulation needs step > 0 and a finite horizon ≥ 0 (got step {step}, horizon {horizon})"
        )]));
    }
    if gains.len() != game.num_players() || gains.iter().zip(game.input_dims()).any(|(k, p)| k.shape() != (p, game.n())) {
        return Err(Error::Dimension("one gain of shape pᵢ×n per player expected".into()));
    }
    let acl = closed_loop_matrix(game, gains);
    let steps = (horizon / step).round() as usize;
    let inputs = |x: &DVector<f64>| gains.iter().map(|k| -(k * x)).collect::<Vec<_>>();
    let mut x = game.x0.clone();
    let mut xs = Vec::with_capacity(steps + 1);
    let mut us = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        if !(x.norm() <= DIVERGENCE_NORM) {
            return Err(Error::Diverged { time: k as f64 * step });
        }
        us.push(inputs(&x));
        xs.push(x.clone());
        if k == steps {
            break;
        }
        let k1 = &acl * &x;
        let k2 = &acl * (&x + &k1 * (step / 2.0));
        let k3 = &acl * (&x + &k2 * (step / 2.0));
        let k4 = &acl * (&x + &k3 * step);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0);
    }
    Ok(Trajectory {
        t0: 0.0,
        step,
        x: xs,
        u: us,
    })
}

/// Adds white Gaussian noise to every state channel with variance equal to
/// the channel's mean power divided by `10^(snr_db/10)`. An infinite SNR
/// returns the trajectory unchanged; inputs are never touched.
pub fn add_noise(traj: &Trajectory, snr_db: f64, seed: u64) -> Trajectory {
    if snr_db == f64::INFINITY || traj.is_empty() {
        return traj.clone();
    }
    let n = traj.x[0].len();
    let samples = traj.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = traj.clone();
    for i in 0..n {
        let power = traj.x.iter().map(|x| x[i] * x[i]).sum::<f64>() / samples;
        let sd = (power / 10f64.powf(snr_db / 10.0)).sqrt();
        let Ok(normal) = Normal::new(0.0, sd) else { continue };
        for x in out.x.iter_mut() {
            x[i] += normal.sample(&mut rng);
        }
    }
    out
}

/// Value of the trajectory error metric and the channels it had to skip.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMetric {
    pub value: f64,
    /// Channels whose potential-trajectory maximum is zero.
    pub degenerate_channels: Vec<usize>,
}

/// `maxᵢ max_t |xᵢᵖ(t) − xᵢ*(t)| / max_t |xᵢᵖ(t)|`: both trajectories are
/// normalized per channel by the first argument's peak magnitude, so the
/// metric is not symmetric in its arguments.
pub fn trajectory_error(traj_p: &Trajectory, traj_star: &Trajectory) -> Result<ErrorMetric> {
    if traj_p.len() != traj_star.len() || (traj_p.step - traj_star.step).abs() > 1e-12 * traj_p.step.abs() {
        return Err(Error::Dimension(format!(
            "trajectories sampled on different grids ({} vs {} samples)",
            traj_p.len(),
            traj_star.len()
        )));
    }
    let n = traj_p.x.first().map_or(0, |x| x.len());
    let mut value = 0.0f64;
    let mut degenerate_channels = Vec::new();
    for i in 0..n {
        let peak = traj_p.x.iter().map(|x| x[i].abs()).fold(0.0, f64::max);
        if peak == 0.0 {
            degenerate_channels.push(i);
            continue;
        }
        for (xp, xs) in traj_p.x.iter().zip(&traj_star.x) {
            value = value.max((xp[i] / peak - xs[i] / peak).abs());
        }
    }
    Ok(ErrorMetric {
        value,
        degenerate_channels,
    })
}
