//! Peaceman-Rachford splitting for the discrete Darcy-Forchheimer system.
//!
//! Each iteration alternates an element-local nonlinear step, solved in
//! closed form, with a linear saddle-point solve that restores the divergence
//! constraint. The splitting parameter α enters both halves; `α = 1/β` is the
//! default for β > 0.

use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::assembly::{AssembledOperators, DiscreteState};
use crate::error::Result;
use crate::forchheimer::{closed_form_step, residual_against, ResidualPair, SplitStepInput};
use crate::level::{Level, Rhs};
use crate::linalg::{l2, norm2, sub2, Vec2};
use crate::saddle::SaddleFactor;

/// Order of the two half-steps within one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrOrder {
    #[default]
    NonlinearFirst,
    /// Linear step first; a closing linear step returns a constrained state.
    LinearFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrConfig {
    pub alpha: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub order: PrOrder,
}

impl PrConfig {
    /// `1/β` for β > 0, otherwise 1.
    pub fn auto_alpha(beta: f64) -> f64 {
        if beta > 0.0 {
            1.0 / beta
        } else {
            1.0
        }
    }

    pub fn for_beta(beta: f64) -> Self {
        Self { alpha: Self::auto_alpha(beta), ..Self::default() }
    }
}

impl Default for PrConfig {
    fn default() -> Self {
        Self { alpha: 1.0, max_iters: 5000, tol: 1e-6, order: PrOrder::NonlinearFirst }
    }
}

/// Worst constraint violation seen after linear steps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ConstraintLog {
    /// max ‖Bᵀu − rhs_p‖₂ / max(1, ‖rhs_p‖₂)
    pub max_violation: f64,
    pub checks: usize,
}

impl ConstraintLog {
    pub fn record(&mut self, ops: &AssembledOperators, u: &[Vec2], rhs_p: &[f64]) {
        let btu = ops.apply_bt(u);
        let defect: Vec<f64> = btu.iter().zip(rhs_p).map(|(a, b)| a - b).collect();
        let v = l2(&defect) / l2(rhs_p).max(1.0);
        self.max_violation = self.max_violation.max(v);
        self.checks += 1;
    }

    pub fn merge(&mut self, other: &ConstraintLog) {
        self.max_violation = self.max_violation.max(other.max_violation);
        self.checks += other.checks;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveReport {
    pub solver: String,
    /// PR iterations or V-cycles.
    pub iterations: usize,
    pub converged: bool,
    /// Residual `r` before the first and after every iteration.
    pub residual_history: Vec<f64>,
    pub final_residual: ResidualPair,
    pub seconds: f64,
    pub constraint: ConstraintLog,
    pub factorizations: usize,
    /// PR iterations spent on the coarsest level (multigrid only).
    pub coarse_iterations: usize,
    pub warnings: Vec<String>,
}

/// Unconstrained nonlinear half-step, solved per triangle in closed form.
pub fn pr_half_nonlinear(state: &DiscreteState, ops: &AssembledOperators, rhs_u: &[Vec2], alpha: f64) -> Vec<Vec2> {
    (0..ops.num_triangles())
        .map(|t| {
            let area = ops.areas[t];
            closed_form_step(&SplitStepInput {
                u: state.u[t],
                grad_p: ops.gradient_on(t, &state.p),
                f: [rhs_u[t][0] / area, rhs_u[t][1] / area],
                k_inv: ops.k_inv[t],
                alpha,
                beta: ops.beta,
                rho: ops.rho,
                mu: ops.mu,
            })
        })
        .collect()
}

/// Constrained linear half-step: solves `A_α u + B p = f + (1/α)M u½ − (β/ρ)N(u½)`, `Bᵀu = rhs_p`.
pub fn pr_half_linear(u_half: &[Vec2], ops: &AssembledOperators, factor: &SaddleFactor, rhs: &Rhs, alpha: f64) -> DiscreteState {
    let br = ops.beta_over_rho();
    let f_half: Vec<Vec2> = (0..ops.num_triangles())
        .map(|t| {
            let uh = u_half[t];
            let s = ops.areas[t] * (1.0 / alpha - br * norm2(uh));
            [rhs.u[t][0] + s * uh[0], rhs.u[t][1] + s * uh[1]]
        })
        .collect();
    factor.solve(ops, &f_half, &rhs.p)
}

/// `steps` PR iterations from `state` in the given order.
pub fn pr_smooth(
    level: &Level,
    factor: &SaddleFactor,
    rhs: &Rhs,
    mut state: DiscreteState,
    alpha: f64,
    steps: usize,
    order: PrOrder,
    log: &mut ConstraintLog,
) -> DiscreteState {
    let ops = &level.ops;
    match order {
        PrOrder::NonlinearFirst => {
            for _ in 0..steps {
                let u_half = pr_half_nonlinear(&state, ops, &rhs.u, alpha);
                state = pr_half_linear(&u_half, ops, factor, rhs, alpha);
                log.record(ops, &state.u, &rhs.p);
            }
        }
        PrOrder::LinearFirst => {
            if steps == 0 {
                return state;
            }
            let mut u_half = state.u.clone();
            for _ in 0..steps {
                state = pr_half_linear(&u_half, ops, factor, rhs, alpha);
                log.record(ops, &state.u, &rhs.p);
                u_half = pr_half_nonlinear(&state, ops, &rhs.u, alpha);
            }
            state = pr_half_linear(&u_half, ops, factor, rhs, alpha);
            log.record(ops, &state.u, &rhs.p);
        }
    }
    state
}

/// PR iteration on `level` against `rhs` until `r ≤ tol` or `max_iters`.
///
/// Without an initial state the linear Darcy system with the same right-hand
/// sides provides one.
pub fn pr_solve(level: &Level, rhs: &Rhs, cfg: &PrConfig, init: Option<DiscreteState>) -> Result<(DiscreteState, SolveReport)> {
    let start = Instant::now();
    let ops = &level.ops;
    let factor = level.solver.for_alpha(ops, cfg.alpha)?;
    let mut state = match init {
        Some(s) => s,
        None => level.solver.for_alpha(ops, f64::INFINITY)?.solve(ops, &rhs.u, &rhs.p),
    };
    let mut report = SolveReport { solver: "pr".into(), ..SolveReport::default() };
    let mut residual = residual_against(&state, ops, &rhs.u, &rhs.p);
    report.residual_history.push(residual.r);
    while residual.r > cfg.tol && report.iterations < cfg.max_iters {
        state = pr_smooth(level, &factor, rhs, state, cfg.alpha, 1, cfg.order, &mut report.constraint);
        report.iterations += 1;
        residual = residual_against(&state, ops, &rhs.u, &rhs.p);
        report.residual_history.push(residual.r);
        if !residual.r.is_finite() {
            break;
        }
    }
    report.converged = residual.r <= cfg.tol;
    if !report.converged {
        report.warnings.push(format!("PR stopped after {} iterations at r = {:e}", report.iterations, residual.r));
    }
    report.final_residual = residual;
    report.factorizations = level.solver.factorization_count();
    report.warnings.extend(ops.warnings.iter().cloned());
    report.seconds = start.elapsed().as_secs_f64();
    Ok((state, report))
}

/// Defect of the nonlinear half-step equation `(1/α)(v − u) + (β/ρ)|v|v = f − (μ/ρ)K⁻¹u − ∇p`, per triangle.
pub fn half_step_defect(state: &DiscreteState, ops: &AssembledOperators, rhs_u: &[Vec2], u_half: &[Vec2], alpha: f64) -> Vec<Vec2> {
    let br = ops.beta_over_rho();
    let nu = ops.mu_over_rho();
    (0..ops.num_triangles())
        .map(|t| {
            let (u, v) = (state.u[t], u_half[t]);
            let area = ops.areas[t];
            let ku = ops.k_inv[t].apply(u);
            let gp = ops.gradient_on(t, &state.p);
            let lhs = [(v[0] - u[0]) / alpha + br * norm2(v) * v[0], (v[1] - u[1]) / alpha + br * norm2(v) * v[1]];
            let rhs = [rhs_u[t][0] / area - nu * ku[0] - gp[0], rhs_u[t][1] / area - nu * ku[1] - gp[1]];
            sub2(lhs, rhs)
        })
        .collect()
}
