//! Randomized self-checks of the discretization and solvers.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::assembly::{DiscreteState, PhysicalParams};
use crate::error::Result;
use crate::fas::{MgConfig, Multigrid};
use crate::forchheimer::{closed_form_step, SplitStepInput};
use crate::level::{apply_system, Level, Rhs};
use crate::linalg::{max_abs_diff, max_abs_diff_vec2, norm2, Sym2, Vec2};
use crate::mesh::{build_uniform_square_mesh, Rect, Side};
use crate::pr::{pr_smooth, pr_solve, ConstraintLog, PrConfig, PrOrder};
use crate::problems::{make_problem, ProblemName};
use crate::saddle::{LinearSolverKind, SaddleCache};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, value: f64, limit: f64) -> Self {
        Self { name, passed: value <= limit, detail: format!("{value:.3e} (limit {limit:.0e})") }
    }
}

/// `s` with `s/α + c s² = m`, `s ≥ 0`, by bisection.
pub fn bisect_magnitude(m: f64, inv_alpha: f64, c: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, m / inv_alpha);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * inv_alpha + c * mid * mid > m {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn random_step_input(rng: &mut StdRng) -> SplitStepInput {
    let mut v = || [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
    let (u, grad_p, f) = (v(), v(), v());
    let a: f64 = rng.gen_range(0.1..5.0);
    let c = rng.gen_range(0.1..5.0);
    let b = rng.gen_range(-0.9..0.9) * (a * c).sqrt();
    SplitStepInput {
        u,
        grad_p,
        f,
        k_inv: Sym2::new(a, b, c),
        alpha: 10f64.powf(rng.gen_range(-3.0..1.0)),
        beta: rng.gen_range(0.0..100.0),
        rho: rng.gen_range(0.5..2.0),
        mu: rng.gen_range(0.5..2.0),
    }
}

/// Worst relative deviation of the closed-form step from bisection over `samples` inputs.
pub fn closed_form_deviation(rng: &mut StdRng, samples: usize) -> f64 {
    (0..samples)
        .map(|_| {
            let inp = random_step_input(rng);
            let f = inp.forcing();
            let m = norm2(f);
            let s = bisect_magnitude(m, 1.0 / inp.alpha, inp.beta / inp.rho);
            let want = if m > 0.0 { [f[0] * s / m, f[1] * s / m] } else { [0.0; 2] };
            let got = closed_form_step(&inp);
            norm2([got[0] - want[0], got[1] - want[1]]) / norm2(want).max(1.0)
        })
        .fold(0.0, f64::max)
}

fn random_rhs(rng: &mut StdRng, nt: usize, nv: usize) -> Rhs {
    let u = (0..nt).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let mut p: Vec<f64> = (0..nv).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean = p.iter().sum::<f64>() / nv as f64;
    p.iter_mut().for_each(|x| *x -= mean);
    Rhs { u, p }
}

pub fn random_state(rng: &mut StdRng, level: &Level) -> DiscreteState {
    let u = (0..level.mesh.num_triangles()).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let mut p: Vec<f64> = (0..level.mesh.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    level.ops.project_zero_mean(&mut p);
    DiscreteState { u, p }
}

fn state_distance(a: &DiscreteState, b: &DiscreteState) -> f64 {
    max_abs_diff_vec2(&a.u, &b.u).max(max_abs_diff(&a.p, &b.p))
}

/// Runs the property suite with the given seed.
pub fn run_checks(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::new();

    out.push(CheckOutcome::new("closed-form step matches bisection", closed_form_deviation(&mut rng, 10_000), 1e-12));

    let params = PhysicalParams::homogeneous(10.0);
    let mesh = build_uniform_square_mesh(Rect::reference_square(), 16)?;
    let schur = Level::new(mesh.clone(), &params, 0.1, LinearSolverKind::Schur)?;
    let direct = SaddleCache::new(LinearSolverKind::Direct);
    let (fs, fd) = (schur.solver.for_alpha(&schur.ops, 0.1)?, direct.for_alpha(&schur.ops, 0.1)?);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let rhs = random_rhs(&mut rng, mesh.num_triangles(), mesh.num_vertices());
        let (a, b) = (fs.solve(&schur.ops, &rhs.u, &rhs.p), fd.solve(&schur.ops, &rhs.u, &rhs.p));
        worst = worst.max(state_distance(&a, &b));
    }
    out.push(CheckOutcome::new("Schur and direct saddle solves agree", worst, 1e-9));

    let problem = make_problem(ProblemName::Problem1, 30.0)?;
    let level = Level::new(build_uniform_square_mesh(problem.domain(), 16)?, &problem.params, 1.0 / 30.0, LinearSolverKind::Schur)?;
    let (_, report) = pr_solve(&level, &level.problem_rhs(), &PrConfig { max_iters: 30, ..PrConfig::for_beta(30.0) }, None)?;
    out.push(CheckOutcome::new("constraint holds after PR linear steps", report.constraint.max_violation, 1e-9));

    let mg = Multigrid::new(&problem.params, problem.domain(), 8, MgConfig { coarse_h_inv: 4, ..MgConfig::for_beta(30.0) }, LinearSolverKind::Schur)?;
    let (_, report) = mg.solve(None)?;
    out.push(CheckOutcome::new("constraint holds through V-cycles", report.constraint.max_violation, 1e-9));

    let fine = mg.finest();
    let exact = random_state(&mut rng, fine);
    let rhs = apply_system(&fine.ops, &exact);
    let factor = fine.solver.for_alpha(&fine.ops, mg.config.alpha)?;
    let mut log = ConstraintLog::default();
    let after_pr = pr_smooth(fine, &factor, &rhs, exact.clone(), mg.config.alpha, 1, PrOrder::NonlinearFirst, &mut log);
    out.push(CheckOutcome::new("exact discrete solution is a PR fixed point", state_distance(&after_pr, &exact), 1e-10));
    let (after_mg, _) = mg.v_cycle(&rhs, exact.clone(), &mut log)?;
    out.push(CheckOutcome::new("exact discrete solution is a V-cycle fixed point", state_distance(&after_mg, &exact), 1e-10));

    let mut worst: f64 = 0.0;
    for name in [ProblemName::Problem1, ProblemName::Problem2] {
        let p = make_problem(name, 30.0)?;
        for _ in 0..1000 {
            let t = rng.gen_range(-1.0..1.0);
            let side = [Side::XPlus, Side::XMinus, Side::YPlus, Side::YMinus][rng.gen_range(0..4)];
            let x: Vec2 = match side {
                Side::XPlus => [1.0, t],
                Side::XMinus => [-1.0, t],
                Side::YPlus => [t, 1.0],
                Side::YMinus => [t, -1.0],
            };
            let n = side.outward_normal();
            let u = p.exact_u(x);
            worst = worst.max(((p.params.g_n)(x, side) - (u[0] * n[0] + u[1] * n[1])).abs());
            let y = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let (u, gp, f) = (p.exact_u(y), p.exact_grad_p(y), (p.params.f)(y));
            let s = 1.0 + p.beta * norm2(u);
            worst = worst.max((f[0] - s * u[0] - gp[0]).abs()).max((f[1] - s * u[1] - gp[1]).abs());
        }
    }
    out.push(CheckOutcome::new("manufactured data consistent with exact solutions", worst, 1e-12));

    let dofs = build_uniform_square_mesh(Rect::reference_square(), 32)?.dofs();
    out.push(CheckOutcome { name: "DoF count at h = 1/16", passed: dofs == 5185, detail: format!("{dofs} (expected 5185)") });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_solves_scalar_equation() {
        let s = bisect_magnitude(5.0, 1.0, 1.0);
        assert!((s + s * s - 5.0).abs() < 1e-13);
        assert_eq!(bisect_magnitude(0.0, 2.0, 1.0), 0.0);
    }
}
