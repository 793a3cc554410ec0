//! Feedback Nash equilibria of linear-quadratic differential games and
//! identification of quadratic ordinal potential functions for them.

// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundled;
pub mod error;
pub mod experiment;
pub mod game;
pub mod identify;
pub mod linalg;
pub mod riccati;
pub mod sdp;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
