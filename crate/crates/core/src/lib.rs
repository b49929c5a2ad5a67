//! Nonlinear multigrid for the mixed P0/P1 Darcy-Forchheimer problem.
//!
//! The discrete problem couples a piecewise-constant velocity with a
//! continuous piecewise-linear pressure on a uniform triangulation of a
//! rectangle. It is solved either by a Peaceman-Rachford splitting
//! ([`pr`]) or by a full-approximation-scheme V-cycle ([`fas`]) that uses the
//! splitting as smoother and as coarsest-level solver.

pub mod assembly;
pub mod checks;
pub mod error;
pub mod fas;
pub mod forchheimer;
pub mod harness;
pub mod level;
pub mod linalg;
pub mod mesh;
pub mod pr;
pub mod problems;
pub mod quadrature;
pub mod saddle;
pub mod transfer;

pub use assembly::{AssembledOperators, DiscreteState, Permeability, PhysicalParams};
pub use error::{Error, Result};
pub use fas::{mg_solve, MgConfig, Multigrid};
pub use forchheimer::ResidualPair;
pub use level::{Level, Rhs};
pub use mesh::{MeshHierarchy, MeshLevel, Rect, Side};
pub use pr::{pr_solve, PrConfig, PrOrder, SolveReport};
pub use problems::{make_problem, ManufacturedProblem, ProblemName};
pub use saddle::LinearSolverKind;
