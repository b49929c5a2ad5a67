//! One discretization level: mesh, assembled operators and its solver cache.

use crate::assembly::{assemble_operators, AssembledOperators, DiscreteState, PhysicalParams};
use crate::error::Result;
use crate::forchheimer::apply_df_operator;
use crate::linalg::{add2, Vec2};
use crate::mesh::MeshLevel;
use crate::saddle::{LinearSolverKind, SaddleCache};

#[derive(Debug)]
pub struct Level {
    pub mesh: MeshLevel,
    pub ops: AssembledOperators,
    pub solver: SaddleCache,
}

impl Level {
    pub fn new(mesh: MeshLevel, params: &PhysicalParams, alpha: f64, kind: LinearSolverKind) -> Result<Self> {
        let ops = assemble_operators(&mesh, params, alpha)?;
        Ok(Self { mesh, ops, solver: SaddleCache::new(kind) })
    }

    pub fn zero_state(&self) -> DiscreteState {
        DiscreteState::zeros(self.mesh.num_triangles(), self.mesh.num_vertices())
    }

    /// Right-hand sides of the assembled problem.
    pub fn problem_rhs(&self) -> Rhs {
        Rhs { u: self.ops.f_rhs.clone(), p: self.ops.w.clone() }
    }
}

/// Momentum and constraint right-hand sides in assembled form.
#[derive(Debug, Clone, PartialEq)]
pub struct Rhs {
    pub u: Vec<Vec2>,
    pub p: Vec<f64>,
}

/// Initial guess from the linear Darcy system `[A B; Bᵀ 0] (u, p) = (f, w)`.
pub fn solve_darcy_initializer(level: &Level) -> Result<DiscreteState> {
    let factor = level.solver.for_alpha(&level.ops, f64::INFINITY)?;
    Ok(factor.solve(&level.ops, &level.ops.f_rhs, &level.ops.w))
}

/// `L(u, p) = (𝒜(u) + B p, Bᵀ u)`, the right-hand side for which `state` is exact.
pub fn apply_system(ops: &AssembledOperators, state: &DiscreteState) -> Rhs {
    let au = apply_df_operator(&state.u, ops);
    let bp = ops.apply_b(&state.p);
    Rhs { u: au.iter().zip(&bp).map(|(&a, &b)| add2(a, b)).collect(), p: ops.apply_bt(&state.u) }
}
