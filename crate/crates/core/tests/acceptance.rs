//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use dfmg::fas::fas_coarse_rhs;
use dfmg::forchheimer::{closed_form_step, constraint_defect, momentum_defect, SplitStepInput};
use dfmg::level::apply_system;
use dfmg::linalg::{max_abs_diff, max_abs_diff_vec2, norm2, Sym2};
use dfmg::mesh::build_uniform_square_mesh;
use dfmg::pr::{pr_smooth, ConstraintLog, PrOrder};
use dfmg::problems::{compute_errors, eoc, ErrorReport};
use dfmg::saddle::SaddleCache;
use dfmg::transfer::{restrict_residual, restrict_state};
use dfmg::{
    make_problem, pr_solve, DiscreteState, Level, LinearSolverKind, MgConfig, Multigrid, PrConfig, ProblemName, SolveReport,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Run {
    h_inv: usize,
    dofs: usize,
    report: SolveReport,
    errors: ErrorReport,
}

fn pr_run(problem: ProblemName, beta: f64, alpha: f64, h_inv: usize) -> Run {
    let p = make_problem(problem, beta).unwrap();
    let level = Level::new(build_uniform_square_mesh(p.domain(), 2 * h_inv).unwrap(), &p.params, alpha, LinearSolverKind::Schur).unwrap();
    let (state, report) = pr_solve(&level, &level.problem_rhs(), &PrConfig { alpha, ..PrConfig::default() }, None).unwrap();
    let errors = compute_errors(&state, &p, &level.mesh);
    Run { h_inv, dofs: level.mesh.dofs(), report, errors }
}

fn mg_run(problem: ProblemName, beta: f64, h_inv: usize) -> Run {
    let p = make_problem(problem, beta).unwrap();
    let mg = Multigrid::new(&p.params, p.domain(), h_inv, MgConfig::for_beta(beta), LinearSolverKind::Schur).unwrap();
    let (state, report) = mg.solve(None).unwrap();
    let errors = compute_errors(&state, &p, &mg.finest().mesh);
    Run { h_inv, dofs: mg.finest().mesh.dofs(), report, errors }
}

fn within(value: usize, target: f64, rel: f64) -> bool {
    (value as f64 - target).abs() <= rel * target
}

fn slope(runs: &[&Run]) -> f64 {
    let x: Vec<f64> = runs.iter().map(|r| r.dofs as f64).collect();
    let y: Vec<f64> = runs.iter().map(|r| r.report.seconds).collect();
    dfmg::harness::loglog_slope(&x, &y)
}

struct Suite {
    failures: usize,
    constraint: ConstraintLog,
}

impl Suite {
    fn report(&mut self, id: u32, name: &str, passed: bool, detail: String) {
        println!("criterion {id} [{}] {name}: {detail}", if passed { "PASS" } else { "FAIL" });
        if !passed {
            self.failures += 1;
        }
    }

    fn track(&mut self, run: &Run) {
        self.constraint.merge(&run.report.constraint);
    }
}

fn alpha_rule(suite: &mut Suite, id: u32, problem: ProblemName, beta: f64, target_auto: f64, target_unit: f64) {
    let auto = pr_run(problem, beta, 1.0 / beta, 64);
    let unit = pr_run(problem, beta, 1.0, 64);
    suite.track(&auto);
    suite.track(&unit);
    let fast = auto.report.seconds < 60.0 && unit.report.seconds < 60.0;
    let ok = auto.report.converged
        && unit.report.converged
        && within(auto.report.iterations, target_auto, 0.15)
        && within(unit.report.iterations, target_unit, 0.15)
        && fast;
    suite.report(
        id,
        &format!("PR iterations, {problem}, h=1/64, beta={beta}"),
        ok,
        format!(
            "alpha=1/beta: {} (target {target_auto} +-15%), alpha=1: {} (target {target_unit} +-15%), {:.1}s / {:.1}s",
            auto.report.iterations, unit.report.iterations, auto.report.seconds, unit.report.seconds
        ),
    );
}

fn random_input(rng: &mut StdRng) -> SplitStepInput {
    let a = rng.gen_range(0.1..5.0);
    let c = rng.gen_range(0.1..5.0);
    let b: f64 = rng.gen_range(-0.9..0.9) * f64::sqrt(a * c);
    let mut v = || [rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)];
    SplitStepInput {
        u: v(),
        grad_p: v(),
        f: v(),
        k_inv: Sym2::new(a, b, c),
        alpha: 10f64.powf(rng.gen_range(-3.0..1.0)),
        beta: rng.gen_range(0.0..200.0),
        rho: rng.gen_range(0.5..2.0),
        mu: rng.gen_range(0.1..3.0),
    }
}

/// Root of `s/α + (β/ρ) s² = m` on [0, α m] by plain bisection.
fn bisection(m: f64, alpha: f64, c: f64) -> f64 {
    let g = |s: f64| s / alpha + c * s * s - m;
    let (mut lo, mut hi) = (0.0, alpha * m);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            hi = mid
        } else {
            lo = mid
        }
    }
    0.5 * (lo + hi)
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut suite = Suite { failures: 0, constraint: ConstraintLog::default() };

    alpha_rule(&mut suite, 1, ProblemName::Problem1, 30.0, 120.0, 686.0);
    alpha_rule(&mut suite, 2, ProblemName::Problem2, 60.0, 213.0, 1376.0);

    // Problem 1, beta = 30: MG from 1/16 to 1/256, PR on the last three levels.
    let mg: Vec<Run> = [16, 32, 64, 128, 256].iter().map(|&h| mg_run(ProblemName::Problem1, 30.0, h)).collect();
    mg.iter().for_each(|r| suite.track(r));
    let cycles: Vec<usize> = mg[1..].iter().map(|r| r.report.iterations).collect();
    let spread = cycles.iter().max().unwrap() - cycles.iter().min().unwrap();
    let ok = mg.iter().all(|r| r.report.converged) && cycles.iter().all(|&c| c <= 8) && spread <= 2;
    suite.report(3, "MG cycles over h=1/32..1/256, problem1, beta=30", ok, format!("cycles {cycles:?} (<= 8, spread {spread} <= 2)"));

    let mut detail = Vec::new();
    let mut ok = true;
    for (problem, lo, hi) in [(ProblemName::Problem1, 3, 9), (ProblemName::Problem2, 4, 14)] {
        for beta in [10.0, 20.0, 30.0, 40.0, 50.0] {
            let counts: Vec<usize> = [32, 64, 128]
                .iter()
                .map(|&h| {
                    let r = mg_run(problem, beta, h);
                    suite.track(&r);
                    ok &= r.report.converged;
                    r.report.iterations
                })
                .collect();
            ok &= counts.iter().all(|c| (lo..=hi).contains(c));
            ok &= counts.windows(2).all(|w| w[1] <= w[0]);
            detail.push(format!("{problem} beta={beta}: {counts:?}"));
        }
    }
    suite.report(4, "MG cycles over beta=10..50 at h=1/32,1/64,1/128 in range and nonincreasing in h", ok, detail.join("; "));

    let eoc_u: Vec<f64> = mg[..4].windows(2).map(|w| eoc(w[0].errors.err_u_l2, w[1].errors.err_u_l2)).collect();
    let eoc_p: Vec<f64> = mg[..4].windows(2).map(|w| eoc(w[0].errors.err_p_h1, w[1].errors.err_p_h1)).collect();
    let ok = eoc_u.iter().chain(&eoc_p).all(|e| (e - 1.0).abs() <= 0.15);
    suite.report(5, "EOC of u in L2 and grad p in L2, h=1/16..1/128", ok, format!("u {eoc_u:.3?}, p {eoc_p:.3?}"));

    let pr: Vec<Run> = [64, 128, 256].iter().map(|&h| pr_run(ProblemName::Problem1, 30.0, 1.0 / 30.0, h)).collect();
    pr.iter().for_each(|r| suite.track(r));
    let s_mg = slope(&mg[2..].iter().collect::<Vec<_>>());
    let s_pr = slope(&pr.iter().collect::<Vec<_>>());
    let ok = (0.9..=1.3).contains(&s_mg) && s_pr > s_mg;
    let times = |runs: &[Run]| runs.iter().map(|r| format!("1/{}: {:.2}s", r.h_inv, r.report.seconds)).collect::<Vec<_>>().join(", ");
    suite.report(
        6,
        "log(time) vs log(N) slope over h=1/64..1/256",
        ok,
        format!("mg {s_mg:.3} in [0.9, 1.3], pr {s_pr:.3} > mg; mg {}; pr {}", times(&mg[2..]), times(&pr)),
    );

    let mut rng = StdRng::seed_from_u64(20_240_601);
    let p = make_problem(ProblemName::Problem2, 30.0).unwrap();
    let level = Level::new(build_uniform_square_mesh(p.domain(), 32).unwrap(), &p.params, 1.0 / 30.0, LinearSolverKind::Schur).unwrap();
    let direct = SaddleCache::new(LinearSolverKind::Direct);
    let (s2, s1) = (level.solver.for_alpha(&level.ops, 1.0 / 30.0).unwrap(), direct.for_alpha(&level.ops, 1.0 / 30.0).unwrap());
    let mut saddle_dev: f64 = 0.0;
    for _ in 0..20 {
        let ru: Vec<[f64; 2]> = (0..level.mesh.num_triangles()).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let mut rp: Vec<f64> = (0..level.mesh.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = rp.iter().sum::<f64>() / rp.len() as f64;
        rp.iter_mut().for_each(|x| *x -= mean);
        let (a, b) = (s2.solve(&level.ops, &ru, &rp), s1.solve(&level.ops, &ru, &rp));
        let scale = b.p.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        saddle_dev = saddle_dev.max(max_abs_diff_vec2(&a.u, &b.u).max(max_abs_diff(&a.p, &b.p)) / scale);
    }
    let mut step_dev: f64 = 0.0;
    for _ in 0..10_000 {
        let inp = random_input(&mut rng);
        let f = inp.forcing();
        let m = norm2(f);
        let s = bisection(m, inp.alpha, inp.beta / inp.rho);
        let want = if m > 0.0 { [f[0] * s / m, f[1] * s / m] } else { [0.0; 2] };
        let got = closed_form_step(&inp);
        step_dev = step_dev.max(norm2([got[0] - want[0], got[1] - want[1]]) / norm2(want).max(1.0));
    }
    suite.report(
        7,
        "Schur vs direct saddle solve (h=1/16, 20 rhs) and closed-form step vs bisection (10^4 inputs)",
        saddle_dev <= 1e-9 && step_dev <= 1e-12,
        format!("saddle {saddle_dev:.2e} <= 1e-9, step {step_dev:.2e} <= 1e-12"),
    );

    // Fixed points on a three-level hierarchy h = 1/4, 1/8, 1/16.
    let p = make_problem(ProblemName::Problem1, 30.0).unwrap();
    let cfg = MgConfig { coarse_h_inv: 4, ..MgConfig::for_beta(30.0) };
    let mg3 = Multigrid::new(&p.params, p.domain(), 16, cfg, LinearSolverKind::Schur).unwrap();
    let fine = mg3.finest();
    let mut v = DiscreteState {
        u: (0..fine.mesh.num_triangles()).map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect(),
        p: (0..fine.mesh.num_vertices()).map(|_| rng.gen_range(-2.0..2.0)).collect(),
    };
    fine.ops.project_zero_mean(&mut v.p);
    let rhs = apply_system(&fine.ops, &v);
    let factor = fine.solver.for_alpha(&fine.ops, cfg.alpha).unwrap();
    let mut log = ConstraintLog::default();
    let dist = |a: &DiscreteState, b: &DiscreteState| max_abs_diff_vec2(&a.u, &b.u).max(max_abs_diff(&a.p, &b.p));
    let after_pr = pr_smooth(fine, &factor, &rhs, v.clone(), cfg.alpha, 1, PrOrder::NonlinearFirst, &mut log);
    let (after_mg, _) = mg3.v_cycle(&rhs, v.clone(), &mut log).unwrap();
    let coarse = &mg3.levels[1];
    let xfer = &mg3.transfers[1];
    let (rc_u, rc_p) = restrict_residual(&momentum_defect(&v, &fine.ops, &rhs.u), &constraint_defect(&v, &fine.ops, &rhs.p), xfer);
    let v_c = restrict_state(&v, xfer, &coarse.ops);
    let coarse_rhs = fas_coarse_rhs(coarse, &v_c, &rc_u, &rc_p);
    let (z, _) = mg3.v_cycle_on(1, &coarse_rhs, v_c.clone(), &mut log).unwrap();
    let correction = dist(&z, &v_c);
    suite.track(&Run { h_inv: 16, dofs: 0, report: SolveReport { constraint: log, ..SolveReport::default() }, errors: ErrorReport::default() });
    let (d_pr, d_mg) = (dist(&after_pr, &v), dist(&after_mg, &v));

    let c = suite.constraint;
    suite.report(
        8,
        "constraint after every PR linear step, V-cycle and projected correction",
        c.checks > 0 && c.max_violation <= 1e-9,
        format!("max |B^T u - w| / max(1, |w|) = {:.2e} over {} checks (<= 1e-9)", c.max_violation, c.checks),
    );
    suite.report(
        9,
        "exact discrete solution fixed under one PR step and one V-cycle; zero residual gives zero correction",
        d_pr <= 1e-10 && d_mg <= 1e-10 && correction <= 1e-10,
        format!("PR {d_pr:.2e}, V-cycle {d_mg:.2e}, correction {correction:.2e} (each <= 1e-10)"),
    );

    println!("acceptance: {} failed, {:.0}s total", suite.failures, start.elapsed().as_secs_f64());
    if suite.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
