//! Moment computation for time-inhomogeneous polynomial jump-diffusions.
//!
//! A process is specified by polynomial characteristics (drift, diffusion,
//! jump moments) with polynomial or piecewise-polynomial time dependence.
//! The generator then acts on polynomials of bounded degree as a matrix
//! H_t on the monomial basis, and conditional moments solve the linear ODE
//! dP/dt = P H_t. This crate builds H_t (genmat), solves the ODE by Magnus
//! expansion or exact exponentials (magnus), cross-checks by Monte Carlo
//! simulation (mc), and ships a catalog of example processes plus a text
//! spec format (processes) behind a CLI (cli).

pub mod cli;
pub mod error;
pub mod genmat;
pub mod linalg;
pub mod magnus;
pub mod mc;
pub mod polyalg;
pub mod processes;

pub use error::{Error, Result};
