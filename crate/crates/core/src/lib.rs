//! Dynamic-range reduction of QUBO matrices that keeps the set of optimal
//! assignments.

pub mod bounds;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod io;
pub mod preserve;
pub mod problems;
pub mod qubo;
pub mod search;

pub use error::{QuboError, Result};
pub use qubo::{Action, Assignment, QuboMatrix, SolveResult};
