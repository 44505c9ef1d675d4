//! Numerical toolkit for periodic homogenization of monotone operators with
//! Musielak-Orlicz growth: N-function algebra and condition checkers, cell
//! problems and effective quantities, Dirichlet solvers at finite and
//! vanishing oscillation scale, and two-scale unfolding diagnostics.

pub mod cell;
pub mod config;
pub mod dirichlet;
pub mod error;
pub mod nfunction;
pub mod operator;
pub mod pgrid;
pub mod solver;
pub mod scalar;
pub mod spatial;
pub mod tabio;
pub mod tabulated;
pub mod twoscale;

pub use error::{HomogError, Result};
