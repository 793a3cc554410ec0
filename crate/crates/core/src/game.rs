//! Game data: dynamics, per-player costs, the candidate potential function,
//! and their JSON file formats.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, hstack, max_abs, min_eigenvalue, symmetrize};

/// Tolerance for positive semi-definiteness checks.
pub const TOL_PSD: f64 = 1e-9;
/// Tolerance for positive definiteness checks.
pub const TOL_PD: f64 = 1e-9;
/// Relative tolerance for equality checks (scaled by matrix max-abs).
pub const TOL_EQ: f64 = 1e-6;
/// Matrices read from files with asymmetry below this are symmetrized.
pub const SYMMETRIZE_TOL: f64 = 1e-10;

/// Linear time-invariant dynamics `ẋ = A x + Σᵢ B⁽ⁱ⁾ u⁽ⁱ⁾`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiDynamics {
    pub a: DMatrix<f64>,
    pub b: Vec<DMatrix<f64>>,
}

impl LtiDynamics {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dims(&self) -> Vec<usize> {
        self.b.iter().map(|b| b.ncols()).collect()
    }

    pub fn total_inputs(&self) -> usize {
        self.b.iter().map(|b| b.ncols()).sum()
    }
}

/// Quadratic cost of one player: state weight `Q` and one input weight
/// `R⁽ⁱʲ⁾` per player `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerCost {
    pub q: DMatrix<f64>,
    pub r: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqGame {
    pub dynamics: LtiDynamics,
    pub costs: Vec<PlayerCost>,
    pub x0: DVector<f64>,
}

impl LqGame {
    pub fn n(&self) -> usize {
        self.dynamics.n()
    }

    pub fn num_players(&self) -> usize {
        self.dynamics.b.len()
    }

    pub fn input_dims(&self) -> Vec<usize> {
        self.dynamics.input_dims()
    }

    pub fn total_inputs(&self) -> usize {
        self.dynamics.total_inputs()
    }

    /// Own-input weight `R⁽ⁱⁱ⁾` of player `i`.
    pub fn r_own(&self, i: usize) -> &DMatrix<f64> {
        &self.costs[i].r[i]
    }

    /// Column offset of player `i`'s inputs inside the stacked input vector.
    pub fn input_offset(&self, i: usize) -> usize {
        self.dynamics.b[..i].iter().map(|b| b.ncols()).sum()
    }

    /// Parses a game file and symmetrizes weight matrices whose asymmetry is
    /// below [`SYMMETRIZE_TOL`]. Remaining problems are reported by
    /// [`validate_game`], which this function runs before returning.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: GameFile = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        let game = file.into_game()?;
        let violations = validate_game(&game);
        if violations.is_empty() {
            Ok(game)
        } else {
            Err(Error::Validation(violations))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GameFile::from_game(self)).expect("game serialization cannot fail")
    }
}

/// Column concatenation `[B⁽¹⁾ … B⁽ᴺ⁾]`.
pub fn stack_input_matrix(dynamics: &LtiDynamics) -> DMatrix<f64> {
    if dynamics.b.is_empty() {
        return DMatrix::zeros(dynamics.n(), 0);
    }
    hstack(&dynamics.b)
}

fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

fn check_symmetric(name: &str, m: &DMatrix<f64>, out: &mut Vec<String>) -> bool {
    if !m.is_square() {
        out.push(format!("{name}: must be square, got {}x{}", m.nrows(), m.ncols()));
        return false;
    }
    if !all_finite(m) {
        out.push(format!("{name}: contains non-finite entries"));
        return false;
    }
    let asym = asymmetry(m);
    if asym > SYMMETRIZE_TOL * max_abs(m).max(1.0) {
        out.push(format!("{name}: must be symmetric, max asymmetry {asym:.3e}"));
        return false;
    }
    true
}

/// Lists every violated invariant of the game data. An empty list means the
/// game is well formed. Never panics on finite or non-finite input.
pub fn validate_game(game: &LqGame) -> Vec<String> {
    let mut out = Vec::new();
    let a = &game.dynamics.a;
    let n = a.nrows();
    if n == 0 {
        out.push("A: state dimension must be at least 1".to_string());
    }
    if a.ncols() != n {
        out.push(format!("A: must be square, got {}x{}", n, a.ncols()));
    }
    if !all_finite(a) {
        out.push("A: contains non-finite entries".to_string());
    }
    let num_players = game.num_players();
    if num_players == 0 {
        out.push("B: at least one player is required".to_string());
    }
    for (i, b) in game.dynamics.b.iter().enumerate() {
        if b.nrows() != n {
            out.push(format!("B[{}]: must have {n} rows, got {}", i + 1, b.nrows()));
        }
        if b.ncols() == 0 {
            out.push(format!("B[{}]: input dimension must be at least 1", i + 1));
        }
        if !all_finite(b) {
            out.push(format!("B[{}]: contains non-finite entries", i + 1));
        }
    }
    if game.x0.len() != n {
        out.push(format!("x0: must have length {n}, got {}", game.x0.len()));
    }
    if !game.x0.iter().all(|v| v.is_finite()) {
        out.push("x0: contains non-finite entries".to_string());
    }
    if game.costs.len() != num_players {
        out.push(format!(
            "players: {} cost entries for {} input matrices",
            game.costs.len(),
            num_players
        ));
    }
    let dims = game.input_dims();
    for (i, cost) in game.costs.iter().enumerate() {
        let qname = format!("Q[{}]", i + 1);
        if cost.q.nrows() != n || cost.q.ncols() != n {
            out.push(format!("{qname}: must be {n}x{n}, got {}x{}", cost.q.nrows(), cost.q.ncols()));
        } else if check_symmetric(&qname, &cost.q, &mut out) {
            let lmin = min_eigenvalue(&cost.q);
            if lmin < -TOL_PSD {
                out.push(format!("{qname}: must be positive semi-definite, min eigenvalue {lmin:.6}"));
            }
        }
        if cost.r.len() != num_players {
            out.push(format!(
                "R[{}]: expected {num_players} input weights, got {}",
                i + 1,
                cost.r.len()
            ));
            continue;
        }
        for (j, r) in cost.r.iter().enumerate() {
            let rname = format!("R[{}][{}]", i + 1, j + 1);
            let p = dims.get(j).copied().unwrap_or(0);
            if r.nrows() != p || r.ncols() != p {
                out.push(format!("{rname}: must be {p}x{p}, got {}x{}", r.nrows(), r.ncols()));
                continue;
            }
            if !check_symmetric(&rname, r, &mut out) {
                continue;
            }
            if i == j {
                let lmin = min_eigenvalue(r);
                if lmin < TOL_PD {
                    out.push(format!("{rname}: must be positive definite, min eigenvalue {lmin:.6}"));
                }
            }
        }
    }
    out
}

/// Non-fatal observations: cross-term input weights that are symmetric but
/// indefinite. They are allowed and only reported.
pub fn game_warnings(game: &LqGame) -> Vec<String> {
    let mut out = Vec::new();
    for (i, cost) in game.costs.iter().enumerate() {
        for (j, r) in cost.r.iter().enumerate() {
            if i != j && r.is_square() && all_finite(r) {
                let lmin = min_eigenvalue(r);
                if lmin < -TOL_PSD {
                    out.push(format!(
                        "R[{}][{}]: cross-term weight is indefinite, min eigenvalue {lmin:.6}",
                        i + 1,
                        j + 1
                    ));
                }
            }
        }
    }
    out
}

/// Identification method that produced a potential function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "TFO")]
    Tfo,
    #[serde(rename = "WTDO")]
    Wtdo,
    #[serde(rename = "IDO")]
    Ido,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Tfo => "TFO",
            Method::Wtdo => "WTDO",
            Method::Ido => "IDO",
        })
    }
}

/// Quadratic potential cost `½∫ xᵀQᵖx + uᵀRᵖu dt` together with its Riccati
/// solution `Pᵖ` and feedback `Kᵖ = Rᵖ⁻¹BᵖᵀPᵖ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialFunction {
    pub qp: DMatrix<f64>,
    pub rp: DMatrix<f64>,
    pub pp: DMatrix<f64>,
    pub kp: DMatrix<f64>,
    /// Diagonals of the per-player scaling matrices (trajectory-free only).
    pub omega: Option<Vec<DVector<f64>>>,
    /// Condition-number bound (trajectory-free only).
    pub alpha: Option<f64>,
    pub method: Method,
    /// Optimal objective reported by the identification.
    pub objective: Option<f64>,
}

impl PotentialFunction {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PotentialFile::from_potential(self)).expect("potential serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PotentialFile = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        file.into_potential()
    }
}

/// Lists violated invariants of a potential function for the given game.
pub fn validate_potential(game: &LqGame, pot: &PotentialFunction) -> Vec<String> {
    let mut out = Vec::new();
    let n = game.n();
    let m = game.total_inputs();
    let shapes = [
        ("Qp", &pot.qp, (n, n)),
        ("Rp", &pot.rp, (m, m)),
        ("Pp", &pot.pp, (n, n)),
        ("Kp", &pot.kp, (m, n)),
    ];
    for (name, mat, shape) in shapes {
        if mat.shape() != shape {
            out.push(format!("{name}: expected {}x{}, got {}x{}", shape.0, shape.1, mat.nrows(), mat.ncols()));
        } else if !all_finite(mat) {
            out.push(format!("{name}: contains non-finite entries"));
        }
    }
    if !out.is_empty() {
        return out;
    }
    for (name, mat) in [("Qp", &pot.qp), ("Pp", &pot.pp)] {
        let lmin = min_eigenvalue(mat);
        if lmin < -TOL_PSD * max_abs(mat).max(1.0) {
            out.push(format!("{name}: must be positive semi-definite, min eigenvalue {lmin:.3e}"));
        }
    }
    let lmin = min_eigenvalue(&pot.rp);
    if lmin < TOL_PD {
        out.push(format!("Rp: must be positive definite, min eigenvalue {lmin:.3e}"));
    } else {
        let bp = stack_input_matrix(&game.dynamics);
        match pot.rp.clone().cholesky() {
            Some(ch) => {
                let k = ch.solve(&(bp.transpose() * &pot.pp));
                let dev = max_abs(&(&k - &pot.kp));
                if dev > TOL_EQ * max_abs(&k).max(1.0) {
                    out.push(format!("Kp: deviates from Rp^-1 Bp' Pp by {dev:.3e}"));
                }
            }
            None => out.push("Rp: Cholesky factorization failed".to_string()),
        }
    }
    if let Some(omega) = &pot.omega {
        let dims = game.input_dims();
        if omega.len() != dims.len() || omega.iter().zip(&dims).any(|(w, &p)| w.len() != p) {
            out.push("omega: one diagonal per player with matching input dimension expected".to_string());
        } else if omega.iter().flat_map(|w| w.iter()).any(|&w| !(w > 0.0)) {
            out.push("omega: entries must be positive".to_string());
        }
    }
    out
}

/// Row-major nested arrays for JSON.
pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Builds a matrix from row-major nested arrays; ragged input is rejected.
pub fn rows_to_matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Parse(format!("{name}: rows have different lengths")));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn symmetrize_if_close(m: DMatrix<f64>) -> DMatrix<f64> {
    if m.is_square() && all_finite(&m) && asymmetry(&m) < SYMMETRIZE_TOL * max_abs(&m).max(1.0) {
        symmetrize(&m)
    } else {
        m
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PlayerFile {
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    r: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GameFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<Vec<f64>>>,
    players: Vec<PlayerFile>,
    x0: Vec<f64>,
}

impl GameFile {
    fn into_game(self) -> Result<LqGame> {
        let a = rows_to_matrix("A", &self.a)?;
        let n = a.nrows();
        let b = self
            .b
            .iter()
            .enumerate()
            .map(|(i, rows)| {
                let m = rows_to_matrix(&format!("B[{}]", i + 1), rows)?;
                // An empty list for a player reads as n×0 so that validation
                // reports the zero input dimension.
                Ok(if m.nrows() == 0 { DMatrix::zeros(n, 0) } else { m })
            })
            .collect::<Result<Vec<_>>>()?;
        let costs = self
            .players
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let q = symmetrize_if_close(rows_to_matrix(&format!("Q[{}]", i + 1), &p.q)?);
                let r = p
                    .r
                    .iter()
                    .enumerate()
                    .map(|(j, rows)| {
                        rows_to_matrix(&format!("R[{}][{}]", i + 1, j + 1), rows).map(symmetrize_if_close)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(PlayerCost { q, r })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LqGame {
            dynamics: LtiDynamics { a, b },
            costs,
            x0: DVector::from_vec(self.x0),
        })
    }

    fn from_game(game: &LqGame) -> Self {
        GameFile {
            a: matrix_to_rows(&game.dynamics.a),
            b: game.dynamics.b.iter().map(matrix_to_rows).collect(),
            players: game
                .costs
                .iter()
                .map(|c| PlayerFile {
                    q: matrix_to_rows(&c.q),
                    r: c.r.iter().map(matrix_to_rows).collect(),
                })
                .collect(),
            x0: game.x0.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PotentialFile {
    method: Method,
    #[serde(rename = "Qp")]
    qp: Vec<Vec<f64>>,
    #[serde(rename = "Rp")]
    rp: Vec<Vec<f64>>,
    #[serde(rename = "Pp")]
    pp: Vec<Vec<f64>>,
    #[serde(rename = "Kp")]
    kp: Vec<Vec<f64>>,
    #[serde(default)]
    omega: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    objective: Option<f64>,
}

impl PotentialFile {
    fn from_potential(p: &PotentialFunction) -> Self {
        PotentialFile {
            method: p.method,
            qp: matrix_to_rows(&p.qp),
            rp: matrix_to_rows(&p.rp),
            pp: matrix_to_rows(&p.pp),
            kp: matrix_to_rows(&p.kp),
            omega: p.omega.as_ref().map(|w| w.iter().map(|d| d.iter().copied().collect()).collect()),
            alpha: p.alpha,
            objective: p.objective,
        }
    }

    fn into_potential(self) -> Result<PotentialFunction> {
        Ok(PotentialFunction {
            qp: symmetrize_if_close(rows_to_matrix("Qp", &self.qp)?),
            rp: symmetrize_if_close(rows_to_matrix("Rp", &self.rp)?),
            pp: symmetrize_if_close(rows_to_matrix("Pp", &self.pp)?),
            kp: rows_to_matrix("Kp", &self.kp)?,
            omega: self.omega.map(|w| w.into_iter().map(DVector::from_vec).collect()),
            alpha: self.alpha,
            method: self.method,
            objective: self.objective,
        })
    }
}
