//! Checks of the ordinal and exact potential conditions.
//!
//! Along feedback trajectories the costate of a player with Riccati solution
//! `P` is `Px`, so the input gradient of player `i`'s Hamiltonian is
//! proportional to `B⁽ⁱ⁾ᵀP⁽ⁱ⁾x` and that of the potential to `B⁽ⁱ⁾ᵀPᵖx`. The
//! ordinal condition asks these to agree in sign channel by channel.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::game::{LqGame, PotentialFunction};
use crate::linalg::max_abs;
use crate::riccati::NeSolution;
use crate::sim::Trajectory;

/// Relative tolerance on the sign-agreement products.
pub const SIGN_TOL: f64 = 1e-9;
/// Relative tolerance for declaring a potential exact.
pub const EXACT_TOL: f64 = 1e-6;

/// Input gradients of the original Hamiltonians and of the potential's,
/// indexed `[sample][player]` with one entry per input channel.
#[derive(Debug, Clone)]
pub struct HamiltonianGradients {
    pub g_orig: Vec<Vec<DVector<f64>>>,
    pub g_pot: Vec<Vec<DVector<f64>>>,
}

impl HamiltonianGradients {
    pub fn compute(game: &LqGame, ne: &NeSolution, pp: &DMatrix<f64>, traj: &Trajectory) -> Self {
        let orig: Vec<DMatrix<f64>> = game.dynamics.b.iter().zip(&ne.p).map(|(b, p)| b.transpose() * p).collect();
        let pot: Vec<DMatrix<f64>> = game.dynamics.b.iter().map(|b| b.transpose() * pp).collect();
        let eval = |ms: &[DMatrix<f64>]| {
            traj.x
                .iter()
                .map(|x| ms.iter().map(|m| m * x).collect())
                .collect()
        };
        HamiltonianGradients {
            g_orig: eval(&orig),
            g_pot: eval(&pot),
        }
    }

    /// One scalar series per (player, channel), in player-major order.
    pub fn channel_series(&self, pot: bool) -> Vec<((usize, usize), Vec<f64>)> {
        let g = if pot { &self.g_pot } else { &self.g_orig };
        let Some(first) = g.first() else { return vec![] };
        let mut out = Vec::new();
        for (i, v) in first.iter().enumerate() {
            for j in 0..v.len() {
                out.push(((i, j), g.iter().map(|s| s[i][j]).collect()));
            }
        }
        out
    }

    /// Writes `t,orig_<i>_<j>…,pot_<i>_<j>…` with one row per sample.
    pub fn to_csv(&self, traj: &Trajectory) -> String {
        let orig = self.channel_series(false);
        let pot = self.channel_series(true);
        let mut out = String::from("t");
        for ((i, j), _) in &orig {
            out.push_str(&format!(",orig_{}_{}", i + 1, j + 1));
        }
        for ((i, j), _) in &pot {
            out.push_str(&format!(",pot_{}_{}", i + 1, j + 1));
        }
        out.push('\n');
        for k in 0..traj.len() {
            out.push_str(&format!("{:.16e}", traj.time(k)));
            for (_, s) in orig.iter().chain(&pot) {
                out.push_str(&format!(",{:.16e}", s[k]));
            }
            out.push('\n');
        }
        out
    }
}

/// Sample indices `k` with a strict sign change between samples `k` and `k+1`.
pub fn sign_changes(series: &[f64]) -> Vec<usize> {
    series
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] * w[1] < 0.0)
        .map(|(k, _)| k)
        .collect()
}

/// Largest distance, in samples, from a crossing in either list to the nearest
/// crossing in the other; `None` when one list is empty and the other is not.
fn misalignment(a: &[usize], b: &[usize]) -> Option<usize> {
    if a.is_empty() && b.is_empty() {
        return Some(0);
    }
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let nearest = |k: usize, other: &[usize]| other.iter().map(|&o| o.abs_diff(k)).min().unwrap_or(0);
    let ab = a.iter().map(|&k| nearest(k, b)).max().unwrap_or(0);
    let ba = b.iter().map(|&k| nearest(k, a)).max().unwrap_or(0);
    Some(ab.max(ba))
}

/// Zero crossings of one channel in both gradient signals.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelCrossings {
    pub player: usize,
    pub channel: usize,
    pub orig_times: Vec<f64>,
    pub pot_times: Vec<f64>,
    /// See [`VerificationReport::max_misalignment`].
    pub misalignment: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    /// Fraction of (sample, player, channel) triples satisfying the sign
    /// condition.
    pub pass_rate: f64,
    pub checks: usize,
    pub violations: usize,
    /// Most negative normalized product `g_orig·g_pot`, or zero.
    pub worst_violation: f64,
    pub crossings: Vec<ChannelCrossings>,
    /// Largest crossing misalignment in samples over all channels; `None`
    /// when some channel crosses zero in one signal but not the other.
    pub max_misalignment: Option<usize>,
}

/// Checks `g_orig·g_pot ≥ −tol` at every sample, player and channel, with
/// `tol = SIGN_TOL·max|g_orig|·max|g_pot|`, and compares zero-crossing times.
pub fn verify_opdg(game: &LqGame, ne: &NeSolution, pot: &PotentialFunction, traj: &Trajectory) -> VerificationReport {
    let grads = HamiltonianGradients::compute(game, ne, &pot.pp, traj);
    let orig = grads.channel_series(false);
    let potential = grads.channel_series(true);
    let peak = |series: &[((usize, usize), Vec<f64>)]| {
        series.iter().flat_map(|(_, s)| s.iter()).fold(0.0f64, |m, v| m.max(v.abs()))
    };
    let scale = peak(&orig) * peak(&potential);
    let tol = SIGN_TOL * scale;
    let mut checks = 0;
    let mut violations = 0;
    let mut worst = 0.0f64;
    let mut crossings = Vec::new();
    let mut max_misalignment = Some(0);
    for (((i, j), so), (_, sp)) in orig.iter().zip(&potential) {
        for (a, b) in so.iter().zip(sp) {
            checks += 1;
            let prod = a * b;
            if prod < -tol {
                violations += 1;
            }
            if scale > 0.0 {
                worst = worst.min(prod / scale);
            }
        }
        let co = sign_changes(so);
        let cp = sign_changes(sp);
        let mis = misalignment(&co, &cp);
        max_misalignment = match (max_misalignment, mis) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        crossings.push(ChannelCrossings {
            player: *i,
            channel: *j,
            orig_times: co.iter().map(|&k| traj.time(k)).collect(),
            pot_times: cp.iter().map(|&k| traj.time(k)).collect(),
            misalignment: mis,
        });
    }
    VerificationReport {
        pass_rate: if checks == 0 { 1.0 } else { (checks - violations) as f64 / checks as f64 },
        checks,
        violations,
        worst_violation: worst,
        crossings,
        max_misalignment,
    }
}

/// Whether the potential is exact: for every player the potential's input
/// gradient equals the player's own, which for this class means the player's
/// block row of `Rᵖ` is `[0 … R⁽ⁱⁱ⁾ … 0]` and `B⁽ⁱ⁾ᵀPᵖ = B⁽ⁱ⁾ᵀP⁽ⁱ⁾`. Returns
/// the verdict and the largest deviation.
pub fn check_exact_potential(game: &LqGame, ne: &NeSolution, pot: &PotentialFunction) -> (bool, f64) {
    let mut residual = 0.0f64;
    let mut scale = 1.0f64;
    let dims = game.input_dims();
    for (i, b) in game.dynamics.b.iter().enumerate() {
        let bp_pot = b.transpose() * &pot.pp;
        let bp_own = b.transpose() * &ne.p[i];
        residual = residual.max(max_abs(&(&bp_pot - &bp_own)));
        scale = scale.max(max_abs(&bp_own));
        let row = game.input_offset(i);
        for (j, &pj) in dims.iter().enumerate() {
            let block = pot.rp.view((row, game.input_offset(j)), (dims[i], pj)).into_owned();
            let target = if i == j { game.r_own(i).clone() } else { DMatrix::zeros(dims[i], pj) };
            residual = residual.max(max_abs(&(block - &target)));
            scale = scale.max(max_abs(&target));
        }
    }
    (residual <= EXACT_TOL * scale, residual)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_changes_of_a_simple_series() {
        assert_eq!(sign_changes(&[1.0, 0.5, -0.5, -1.0]), vec![1]);
        assert!(sign_changes(&[1.0, 2.0, 3.0]).is_empty());
    }

    #[test]
    fn misalignment_counts_samples() {
        assert_eq!(misalignment(&[10, 50], &[11, 50]), Some(1));
        assert_eq!(misalignment(&[], &[]), Some(0));
        assert_eq!(misalignment(&[3], &[]), None);
    }
}
