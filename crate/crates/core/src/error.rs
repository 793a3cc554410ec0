use thiserror::Error;

use crate::identify::tfo::FeasibilityReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("could not parse input: {0}")]
    Parse(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("the pair (A, B) is not stabilizable: {0}")]
    NotStabilizable(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { residual: f64, iterations: usize },

    /// The trajectory-free program has no solution. This is not a proof that
    /// the game lacks an ordinal potential; the trajectory-dependent method
    /// has a strictly weaker constraint set and may still succeed.
    #[error("trajectory-free identification infeasible (violation measure {measure:.3e}, advisory: {})", report.advisory)]
    InfeasibleTfo { report: Box<FeasibilityReport>, measure: f64 },

    #[error("trajectory-dependent identification infeasible (violation measure {measure:.3e})")]
    InfeasibleWtdo { measure: f64 },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("simulation diverged at t = {time}")]
    Diverged { time: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
