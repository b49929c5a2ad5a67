//! Full approximation scheme V-cycle with Peaceman-Rachford smoothing.
//!
//! On level `k` the cycle
//! 1. applies `m` PR iterations (nonlinear half-step first),
//! 2. restricts the state and the residual and forms the coarse right-hand
//!    side `L_c(v_c) + R r`,
//! 3. recurses, or on the coarsest level runs PR to a tighter tolerance,
//! 4. prolongates the correction and projects it back onto the discrete
//!    constraint with a frozen-coefficient saddle solve,
//! 5. applies `m` PR iterations (linear half-step first) and a closing
//!    linear step.

use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::assembly::{DiscreteState, PhysicalParams};
use crate::error::{Error, Result};
use crate::forchheimer::{constraint_defect, momentum_defect, residual_against};
use crate::level::{apply_system, solve_darcy_initializer, Level, Rhs};
use crate::linalg::{add2, norm2, sub2, Sym2, Vec2};
use crate::mesh::{MeshHierarchy, Rect};
use crate::pr::{pr_smooth, pr_solve, ConstraintLog, PrConfig, PrOrder, SolveReport};
use crate::saddle::LinearSolverKind;
use crate::transfer::{restrict_residual, restrict_state, TransferOps};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MgConfig {
    /// Splitting parameter on every level.
    pub alpha: f64,
    /// PR iterations per pre- and post-smoothing phase.
    pub smooth_steps: usize,
    /// Cells per unit length on the coarsest level. Ignored when `levels` is set.
    pub coarse_h_inv: usize,
    /// Number of levels including the finest.
    pub levels: Option<usize>,
    /// Outer stopping tolerance on the finest-level residual `r`.
    pub tol: f64,
    /// Coarsest-level tolerance, relative to its right-hand side. Defaults to `tol / 10`.
    pub coarse_tol: Option<f64>,
    pub coarse_max_iters: usize,
    pub max_cycles: usize,
    /// Picard sweeps when freezing the Forchheimer term of the correction projection.
    pub projection_picard_steps: usize,
}

impl Default for MgConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            smooth_steps: 3,
            coarse_h_inv: 16,
            levels: None,
            tol: 1e-6,
            coarse_tol: None,
            coarse_max_iters: 5000,
            max_cycles: 50,
            projection_picard_steps: 2,
        }
    }
}

impl MgConfig {
    pub fn for_beta(beta: f64) -> Self {
        Self { alpha: PrConfig::auto_alpha(beta), ..Self::default() }
    }

    pub fn effective_coarse_tol(&self) -> f64 {
        self.coarse_tol.unwrap_or(self.tol / 10.0)
    }

    /// Coarsest `h_inv` and level count for a finest `h_inv`.
    pub fn plan(&self, fine_h_inv: usize) -> Result<(usize, usize)> {
        if fine_h_inv == 0 {
            return Err(Error::InvalidArgument("h_inv must be positive".into()));
        }
        if let Some(levels) = self.levels {
            if levels == 0 {
                return Err(Error::InvalidArgument("at least one level is required".into()));
            }
            let div = 1usize << (levels - 1);
            if fine_h_inv % div != 0 {
                return Err(Error::InvalidArgument(format!("h_inv {fine_h_inv} cannot be halved {} times", levels - 1)));
            }
            return Ok((fine_h_inv / div, levels));
        }
        if self.coarse_h_inv == 0 {
            return Err(Error::InvalidArgument("coarse h_inv must be positive".into()));
        }
        if fine_h_inv <= self.coarse_h_inv {
            return Ok((fine_h_inv, 1));
        }
        let ratio = fine_h_inv / self.coarse_h_inv;
        if fine_h_inv % self.coarse_h_inv != 0 || !ratio.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "h_inv {fine_h_inv} is not a power-of-two multiple of the coarse h_inv {}",
                self.coarse_h_inv
            )));
        }
        Ok((self.coarse_h_inv, ratio.trailing_zeros() as usize + 1))
    }
}

/// Per-cycle bookkeeping.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CycleStats {
    pub coarse_iterations: usize,
    pub coarse_unconverged: usize,
}

/// Nested levels, coarsest first, with the transfers between neighbours.
#[derive(Debug)]
pub struct Multigrid {
    pub levels: Vec<Level>,
    pub transfers: Vec<TransferOps>,
    pub config: MgConfig,
}

impl Multigrid {
    /// Levels on `domain` with `2 · h_inv` subdivisions per side (the reference square has side 2).
    pub fn new(params: &PhysicalParams, domain: Rect, fine_h_inv: usize, config: MgConfig, kind: LinearSolverKind) -> Result<Self> {
        let (coarse_h_inv, num_levels) = config.plan(fine_h_inv)?;
        let per_unit = (domain.x1 - domain.x0).max(domain.y1 - domain.y0);
        let n0 = (coarse_h_inv as f64 * per_unit).round() as usize;
        let hierarchy = MeshHierarchy::uniform(domain, n0, num_levels)?;
        Self::from_hierarchy(&hierarchy, params, config, kind)
    }

    pub fn from_hierarchy(hierarchy: &MeshHierarchy, params: &PhysicalParams, config: MgConfig, kind: LinearSolverKind) -> Result<Self> {
        if !(config.alpha > 0.0) {
            return Err(Error::Parameter(format!("alpha must be positive, got {}", config.alpha)));
        }
        let levels = hierarchy
            .levels
            .iter()
            .map(|m| Level::new(m.clone(), params, config.alpha, kind))
            .collect::<Result<Vec<_>>>()?;
        let transfers =
            (0..hierarchy.num_levels() - 1).map(|k| TransferOps::from_hierarchy(hierarchy, k)).collect::<Result<Vec<_>>>()?;
        Ok(Self { levels, transfers, config })
    }

    pub fn finest(&self) -> &Level {
        self.levels.last().expect("at least one level")
    }

    fn coarse_config(&self) -> PrConfig {
        PrConfig {
            alpha: self.config.alpha,
            max_iters: self.config.coarse_max_iters,
            tol: self.config.effective_coarse_tol(),
            order: PrOrder::NonlinearFirst,
        }
    }

    /// One V-cycle on the finest level.
    pub fn v_cycle(&self, rhs: &Rhs, state: DiscreteState, log: &mut ConstraintLog) -> Result<(DiscreteState, CycleStats)> {
        self.v_cycle_on(self.levels.len() - 1, rhs, state, log)
    }

    /// One V-cycle starting on level `k` (0 is the coarsest, where it is a PR solve).
    pub fn v_cycle_on(&self, k: usize, rhs: &Rhs, state: DiscreteState, log: &mut ConstraintLog) -> Result<(DiscreteState, CycleStats)> {
        if k >= self.levels.len() {
            return Err(Error::InvalidArgument(format!("no level {k}")));
        }
        let mut stats = CycleStats::default();
        let state = self.cycle(k, rhs, state, log, &mut stats)?;
        Ok((state, stats))
    }

    fn cycle(&self, k: usize, rhs: &Rhs, state: DiscreteState, log: &mut ConstraintLog, stats: &mut CycleStats) -> Result<DiscreteState> {
        let level = &self.levels[k];
        if k == 0 {
            let (z, report) = pr_solve(level, rhs, &self.coarse_config(), Some(state))?;
            stats.coarse_iterations += report.iterations;
            stats.coarse_unconverged += usize::from(!report.converged);
            log.merge(&report.constraint);
            return Ok(z);
        }
        let alpha = self.config.alpha;
        let m = self.config.smooth_steps;
        let factor = level.solver.for_alpha(&level.ops, alpha)?;
        let state = pr_smooth(level, &factor, rhs, state, alpha, m, PrOrder::NonlinearFirst, log);

        let coarse = &self.levels[k - 1];
        let xfer = &self.transfers[k - 1];
        let r_u = momentum_defect(&state, &level.ops, &rhs.u);
        let r_p = constraint_defect(&state, &level.ops, &rhs.p);
        let v_c = restrict_state(&state, xfer, &coarse.ops);
        let (rc_u, rc_p) = restrict_residual(&r_u, &r_p, xfer);
        let coarse_rhs = fas_coarse_rhs(coarse, &v_c, &rc_u, &rc_p);
        let z = self.cycle(k - 1, &coarse_rhs, v_c.clone(), log, stats)?;

        let e_u: Vec<Vec2> = z.u.iter().zip(&v_c.u).map(|(&a, &b)| sub2(a, b)).collect();
        let e_p: Vec<f64> = z.p.iter().zip(&v_c.p).map(|(a, b)| a - b).collect();
        let state = project_correction(
            level,
            &state,
            &xfer.prolong_u(&e_u),
            &xfer.prolong_p(&e_p),
            &rhs.p,
            self.config.projection_picard_steps,
            log,
        )?;
        Ok(pr_smooth(level, &factor, rhs, state, alpha, m, PrOrder::LinearFirst, log))
    }

    /// V-cycles on the assembled finest problem until `r ≤ tol`.
    ///
    /// A single level reduces to one PR solve on it, reported as one cycle.
    pub fn solve(&self, init: Option<DiscreteState>) -> Result<(DiscreteState, SolveReport)> {
        let start = Instant::now();
        let fine = self.finest();
        let rhs = fine.problem_rhs();
        let mut report = SolveReport { solver: "mg".into(), ..SolveReport::default() };
        let mut state = match init {
            Some(s) => s,
            None => solve_darcy_initializer(fine)?,
        };
        let mut residual = residual_against(&state, &fine.ops, &rhs.u, &rhs.p);
        report.residual_history.push(residual.r);

        if self.levels.len() == 1 {
            let cfg = PrConfig { tol: self.config.tol, ..self.coarse_config() };
            if residual.r > cfg.tol {
                let (z, pr) = pr_solve(fine, &rhs, &cfg, Some(state))?;
                state = z;
                report.iterations = 1;
                report.coarse_iterations = pr.iterations;
                report.constraint = pr.constraint;
                residual = pr.final_residual;
                report.residual_history.push(residual.r);
            }
        } else {
            while residual.r > self.config.tol && report.iterations < self.config.max_cycles {
                let (z, stats) = self.v_cycle(&rhs, state, &mut report.constraint)?;
                state = z;
                report.iterations += 1;
                report.coarse_iterations += stats.coarse_iterations;
                if stats.coarse_unconverged > 0 {
                    report.warnings.push(format!("coarse solve did not converge in cycle {}", report.iterations));
                }
                report.constraint.record(&fine.ops, &state.u, &rhs.p);
                residual = residual_against(&state, &fine.ops, &rhs.u, &rhs.p);
                report.residual_history.push(residual.r);
                if !residual.r.is_finite() {
                    break;
                }
            }
        }
        report.converged = residual.r <= self.config.tol;
        if !report.converged {
            report.warnings.push(format!("multigrid stopped after {} cycles at r = {:e}", report.iterations, residual.r));
        }
        report.final_residual = residual;
        report.factorizations = self.levels.iter().map(|l| l.solver.factorization_count()).sum();
        report.warnings.extend(fine.ops.warnings.iter().cloned());
        report.seconds = start.elapsed().as_secs_f64();
        Ok((state, report))
    }
}

/// `L_c(v_c) + r_c` with `L(u, p) = (𝒜(u) + B p, Bᵀ u)`.
pub fn fas_coarse_rhs(coarse: &Level, v_c: &DiscreteState, rc_u: &[Vec2], rc_p: &[f64]) -> Rhs {
    let l = apply_system(&coarse.ops, v_c);
    Rhs {
        u: l.u.iter().zip(rc_u).map(|(&a, &r)| add2(a, r)).collect(),
        p: l.p.iter().zip(rc_p).map(|(a, r)| a + r).collect(),
    }
}

/// Adds the prolongated correction and removes its constraint violation.
///
/// With `d = Bᵀ(u + e_u) − rhs_p`, the saddle system
/// `A_δ δ + B θ = 0`, `Bᵀ δ = d` is solved for `δ` and `u + e_u − δ` is
/// returned. `A_δ = A + (β/ρ)|T||δ̂| I` freezes the Forchheimer term at the
/// previous `δ`, starting from `e_u`.
pub fn project_correction(
    level: &Level,
    state: &DiscreteState,
    e_u: &[Vec2],
    e_p: &[f64],
    rhs_p: &[f64],
    picard_steps: usize,
    log: &mut ConstraintLog,
) -> Result<DiscreteState> {
    let ops = &level.ops;
    let mut u: Vec<Vec2> = state.u.iter().zip(e_u).map(|(&a, &b)| add2(a, b)).collect();
    let d: Vec<f64> = ops.apply_bt(&u).iter().zip(rhs_p).map(|(a, b)| a - b).collect();
    if d.iter().any(|v| *v != 0.0) {
        let br = ops.beta_over_rho();
        let zero = vec![[0.0; 2]; u.len()];
        let mut frozen: Vec<Vec2> = e_u.to_vec();
        let mut delta = zero.clone();
        for _ in 0..picard_steps.max(1) {
            let blocks: Vec<Sym2> = (0..ops.num_triangles())
                .map(|t| ops.a_blocks[t] + Sym2::scalar(br * ops.areas[t] * norm2(frozen[t])))
                .collect();
            let factor = level.solver.factorize(ops, &blocks)?;
            delta = factor.solve(ops, &zero, &d).u;
            frozen.clone_from(&delta);
        }
        u.iter_mut().zip(&delta).for_each(|(x, dl)| *x = sub2(*x, *dl));
    }
    log.record(ops, &u, rhs_p);
    let mut p: Vec<f64> = state.p.iter().zip(e_p).map(|(a, b)| a + b).collect();
    ops.project_zero_mean(&mut p);
    Ok(DiscreteState { u, p })
}

/// Builds the hierarchy for `params` on `domain` and solves on its finest level.
pub fn mg_solve(
    params: &PhysicalParams,
    domain: Rect,
    fine_h_inv: usize,
    config: MgConfig,
    kind: LinearSolverKind,
) -> Result<(DiscreteState, SolveReport)> {
    Multigrid::new(params, domain, fine_h_inv, config, kind)?.solve(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forchheimer::nonlinear_residual;

    #[test]
    fn plan_levels() {
        let cfg = MgConfig::default();
        assert_eq!(cfg.plan(16).unwrap(), (16, 1));
        assert_eq!(cfg.plan(8).unwrap(), (8, 1));
        assert_eq!(cfg.plan(64).unwrap(), (16, 3));
        assert!(cfg.plan(48).is_err());
        let cfg = MgConfig { levels: Some(2), ..cfg };
        assert_eq!(cfg.plan(8).unwrap(), (4, 2));
        assert!(MgConfig { levels: Some(4), ..cfg }.plan(4).is_err());
    }

    #[test]
    fn two_level_cycles_converge() {
        let params = PhysicalParams { f: std::sync::Arc::new(|x| [1.0 + x[1], x[0] * x[0]]), ..PhysicalParams::homogeneous(5.0) };
        let cfg = MgConfig { alpha: 0.2, coarse_h_inv: 2, tol: 1e-8, ..MgConfig::default() };
        let mg = Multigrid::new(&params, Rect::reference_square(), 4, cfg, LinearSolverKind::Schur).unwrap();
        assert_eq!(mg.levels.len(), 2);
        let (state, report) = mg.solve(None).unwrap();
        assert!(report.converged, "{report:?}");
        assert!(report.iterations <= 15);
        assert!(nonlinear_residual(&state, &mg.finest().ops).r <= 1e-8);
        assert!(report.constraint.max_violation < 1e-9);
    }
}
