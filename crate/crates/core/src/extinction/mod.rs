//! Extinction probabilities as an invariant graph `q(x) = φ(x, q(Tx))`.
//!
//! The PGF cocycle `φ^{(n)}`, a bracketing solver for `q` on a uniform grid,
//! and the Hölder diagnostics used to study how the iterates `φ^{(n)}(·, 0)`
//! approach `q`.

mod grid;
mod holder;
mod solver;

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::reproduction::ReproductionError;

pub use grid::{GridFunction, Interpolation};
pub(crate) use grid::{node, Transport};
pub use holder::{holder_seminorm, interpolation_bound, interpolation_inequality_check, HolderReport};
pub use solver::{
    compose_along, convergence_profile, log_derivative_iterate, pgf_iterate, residual, solve_lower,
    solve_q, BracketCertificate, ConvergenceRow, ExtinctionSolution, MAX_BLOCK, PULLBACK_STEPS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtinctionError {
    #[error("s = {s} lies outside [0, 1]")]
    DomainError { s: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no upper bracket: {reason}")]
    NoUpperBracket { reason: String },
    #[error("bracket still {width} wide after {blocks} blocks")]
    Stalled { blocks: usize, width: f64 },
    #[error(transparent)]
    Reproduction(#[from] ReproductionError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}
