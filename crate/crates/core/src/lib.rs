//! Quadratic operads, their wheeled completions, quadratic duals, cobar
//! complexes and Koszulness checks, computed exactly over Q.

pub mod cli;
pub mod cobar;
pub mod error;
pub mod expansion;
pub mod homology;
pub mod lincomb;
pub mod presentations;
pub mod qlinalg;
pub mod treealg;

pub use error::{Error, Result};
pub use lincomb::LinComb;
pub use qlinalg::Rational;
