//! The two example games shipped with the crate.

use crate::game::LqGame;

pub const EXAMPLE1_JSON: &str = include_str!("../games/example1.json");
pub const EXAMPLE2_JSON: &str = include_str!("../games/example2.json");

/// Six-state game with two players of two inputs each.
pub fn example1() -> LqGame {
    LqGame::from_json(EXAMPLE1_JSON).expect("bundled example 1 is valid")
}

/// Three-state vehicle manipulator shared by a human and an automation,
/// one input each.
pub fn example2() -> LqGame {
    LqGame::from_json(EXAMPLE2_JSON).expect("bundled example 2 is valid")
}

/// Looks up a bundled game by name (`example1` or `example2`).
pub fn by_name(name: &str) -> Option<(LqGame, &'static str)> {
    match name {
        "example1" => Some((example1(), EXAMPLE1_JSON)),
        "example2" => Some((example2(), EXAMPLE2_JSON)),
        _ => None,
    }
}

/// Reference values reported for the two examples, rounded to two or three
/// decimals. Matrices are row-major.
pub mod reference {
    /// Equilibrium gains of the first example's two players (2×6 each).
    pub const EX1_K1: [f64; 12] = [
        -0.90, 2.26, 1.03, -0.55, -0.80, 0.40, //
        -2.94, -1.04, 3.91, 1.43, -0.81, 0.89,
    ];
    pub const EX1_K2: [f64; 12] = [
        -0.92, -0.25, 0.69, 2.71, -1.44, 2.04, //
        -0.45, -0.55, 0.65, -0.78, -1.53, 1.31,
    ];
    /// Trajectory-free potential weights of the first example.
    pub const EX1_QP: [f64; 36] = [
        16.75, -1.26, -2.62, -3.88, 0.73, 4.11, //
        -1.26, 5.16, 1.17, 0.70, 0.56, 0.85, //
        -2.62, 1.17, 6.10, 0.43, -0.26, -0.15, //
        -3.88, 0.70, 0.43, 6.72, 0.56, 1.91, //
        0.73, 0.56, -0.26, 0.56, 11.21, -1.02, //
        4.11, 0.85, -0.15, 1.91, -1.02, 2.87,
    ];
    pub const EX1_RP: [f64; 16] = [
        2.12, 0.39, 0.32, -0.08, //
        0.39, 2.06, -0.07, -0.10, //
        0.32, -0.07, 3.22, -0.87, //
        -0.08, -0.10, -0.87, 6.84,
    ];
    /// Trajectory errors of TFO, WTDO and IDO on the first example.
    pub const EX1_ERRORS: [f64; 3] = [0.019, 0.077, 0.076];
    /// Identification times in seconds, same order, on unspecified hardware.
    pub const EX1_TIMES: [f64; 3] = [0.15, 28.15, 212.1];

    /// Equilibrium gains of the second example (1×3 each).
    pub const EX2_KH: [f64; 3] = [-0.78, 0.26, 1.42];
    pub const EX2_KA: [f64; 3] = [0.42, 1.59, 0.83];
    /// Trajectory-dependent potential weights of the second example.
    pub const EX2_QP: [f64; 9] = [0.82, 0.24, -0.48, 0.24, 0.59, -1.01, -0.48, -1.01, 2.15];
    pub const EX2_RP: [f64; 4] = [1.00, -0.05, -0.05, 1.60];
    /// SNR levels of the noise study in dB; the last entry is noise-free.
    pub const EX2_SNRS: [f64; 5] = [10.0, 20.0, 30.0, 40.0, f64::INFINITY];
    /// Single-run trajectory errors of WTDO and IDO at those levels.
    pub const EX2_WTDO_ERRORS: [f64; 5] = [0.314, 0.107, 0.029, 0.027, 0.002];
    pub const EX2_IDO_ERRORS: [f64; 5] = [0.603, 0.265, 0.104, 0.047, 0.026];
}
