//! Small constructed games shared by the integration tests.
#![allow(dead_code)]

pub mod sdp_oracle;

use nalgebra::{DMatrix, DVector};
use opdg::game::{LqGame, LtiDynamics, PlayerCost};

pub fn m(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}

pub fn s(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

pub fn game(a: DMatrix<f64>, b: Vec<DMatrix<f64>>, costs: Vec<(DMatrix<f64>, Vec<DMatrix<f64>>)>, x0: &[f64]) -> LqGame {
    LqGame {
        dynamics: LtiDynamics { a, b },
        costs: costs.into_iter().map(|(q, r)| PlayerCost { q, r }).collect(),
        x0: DVector::from_column_slice(x0),
    }
}

/// One player, scalar dynamics `ẋ = ax + u`, cost `q x² + r u²`.
pub fn scalar_single(a: f64, q: f64, r: f64, x0: f64) -> LqGame {
    game(s(a), vec![s(1.0)], vec![(s(q), vec![s(r)])], &[x0])
}

/// Two players sharing one cost (`Q = I`, every input weighted by `I`), so
/// the game is an identical-interest game whose equilibrium is the team
/// optimum and whose cost is an exact potential.
pub fn team_game() -> LqGame {
    let a = m(4, 4, &[
        0.0, 1.0, 0.0, 0.0, //
        -1.0, -0.5, 0.3, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        0.2, 0.0, -2.0, -0.4,
    ]);
    let b1 = m(4, 1, &[0.0, 1.0, 0.0, 0.0]);
    let b2 = m(4, 1, &[0.0, 0.0, 0.0, 1.0]);
    let q = DMatrix::identity(4, 4);
    let cost = (q, vec![s(1.0), s(1.0)]);
    game(a, vec![b1, b2], vec![cost.clone(), cost], &[1.0, -0.5, 0.8, 0.2])
}

/// A single-player game whose own cost is `Q = I`, `R = I`.
pub fn identity_single() -> LqGame {
    let a = m(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -1.0, -2.0, -1.5]);
    let b = m(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    game(a, vec![b], vec![(DMatrix::identity(3, 3), vec![DMatrix::identity(2, 2)])], &[1.0, 0.0, -1.0])
}
