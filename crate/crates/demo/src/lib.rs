//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string; the page parses it and draws on canvases.

use dfmg::fas::{MgConfig, Multigrid};
use dfmg::mesh::build_uniform_square_mesh;
use dfmg::problems::{compute_errors, make_problem};
use dfmg::{pr_solve, Level, LinearSolverKind, PrConfig, ProblemName};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest h_inv accepted from the page.
pub const MAX_H_INV: usize = 32;

#[derive(Debug, Serialize)]
pub struct FieldView {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub velocity: Vec<[f64; 2]>,
    pub pressure: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    pub err_u_l2: f64,
    pub err_p_h1: f64,
    pub seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct HistoryView {
    pub pr: Vec<f64>,
    pub mg: Vec<f64>,
    pub pr_seconds: f64,
    pub mg_seconds: f64,
    pub mg_coarse_iterations: usize,
}

#[derive(Debug, Serialize)]
pub struct AlphaPoint {
    pub alpha: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn parse_problem(name: &str) -> dfmg::Result<ProblemName> {
    name.parse()
}

fn check_h(h_inv: usize) -> dfmg::Result<()> {
    if h_inv == 0 || h_inv > MAX_H_INV {
        return Err(dfmg::Error::InvalidArgument(format!("h_inv must be in 1..={MAX_H_INV}")));
    }
    Ok(())
}

fn coarse_for(h_inv: usize) -> usize {
    (h_inv / 4).max(1)
}

/// Solves with `solver` ("pr" or "mg") and returns mesh, fields and convergence data.
pub fn solve_fields(problem: &str, beta: f64, h_inv: usize, solver: &str, alpha: f64) -> dfmg::Result<FieldView> {
    check_h(h_inv)?;
    let p = make_problem(parse_problem(problem)?, beta)?;
    let (state, report, mesh) = match solver {
        "pr" => {
            let level = Level::new(build_uniform_square_mesh(p.domain(), 2 * h_inv)?, &p.params, alpha, LinearSolverKind::Schur)?;
            let (s, r) = pr_solve(&level, &level.problem_rhs(), &PrConfig { alpha, ..PrConfig::default() }, None)?;
            (s, r, level.mesh)
        }
        "mg" => {
            let cfg = MgConfig { alpha, coarse_h_inv: coarse_for(h_inv), ..MgConfig::default() };
            let mg = Multigrid::new(&p.params, p.domain(), h_inv, cfg, LinearSolverKind::Schur)?;
            let (s, r) = mg.solve(None)?;
            (s, r, mg.finest().mesh.clone())
        }
        other => return Err(dfmg::Error::InvalidArgument(format!("unknown solver '{other}'"))),
    };
    let errors = compute_errors(&state, &p, &mesh);
    Ok(FieldView {
        vertices: mesh.vertices,
        triangles: mesh.triangles,
        velocity: state.u,
        pressure: state.p,
        iterations: report.iterations,
        converged: report.converged,
        residual_history: report.residual_history,
        err_u_l2: errors.err_u_l2,
        err_p_h1: errors.err_p_h1,
        seconds: report.seconds,
    })
}

/// Residual histories of PR and MG from the same Darcy initial guess.
pub fn residual_histories(problem: &str, beta: f64, h_inv: usize, alpha: f64) -> dfmg::Result<HistoryView> {
    let pr = solve_fields(problem, beta, h_inv, "pr", alpha)?;
    let p = make_problem(parse_problem(problem)?, beta)?;
    let cfg = MgConfig { alpha, coarse_h_inv: coarse_for(h_inv), ..MgConfig::default() };
    let (_, mg) = Multigrid::new(&p.params, p.domain(), h_inv, cfg, LinearSolverKind::Schur)?.solve(None)?;
    Ok(HistoryView {
        pr: pr.residual_history,
        mg: mg.residual_history,
        pr_seconds: pr.seconds,
        mg_seconds: mg.seconds,
        mg_coarse_iterations: mg.coarse_iterations,
    })
}

/// PR iteration counts for each α, capped at `max_iters`.
pub fn alpha_sweep(problem: &str, beta: f64, h_inv: usize, alphas: &[f64], max_iters: usize) -> dfmg::Result<Vec<AlphaPoint>> {
    check_h(h_inv)?;
    let p = make_problem(parse_problem(problem)?, beta)?;
    let level = Level::new(build_uniform_square_mesh(p.domain(), 2 * h_inv)?, &p.params, 1.0, LinearSolverKind::Schur)?;
    let rhs = level.problem_rhs();
    alphas
        .iter()
        .map(|&alpha| {
            let (_, r) = pr_solve(&level, &rhs, &PrConfig { alpha, max_iters, ..PrConfig::default() }, None)?;
            Ok(AlphaPoint { alpha, iterations: r.iterations, converged: r.converged })
        })
        .collect()
}

fn to_js<T: Serialize>(r: dfmg::Result<T>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn solve(problem: &str, beta: f64, h_inv: usize, solver: &str, alpha: f64) -> Result<String, JsError> {
    to_js(solve_fields(problem, beta, h_inv, solver, alpha))
}

#[wasm_bindgen]
pub fn histories(problem: &str, beta: f64, h_inv: usize, alpha: f64) -> Result<String, JsError> {
    to_js(residual_histories(problem, beta, h_inv, alpha))
}

#[wasm_bindgen(js_name = alphaSweep)]
pub fn alpha_sweep_js(problem: &str, beta: f64, h_inv: usize, alphas: &[f64], max_iters: usize) -> Result<String, JsError> {
    to_js(alpha_sweep(problem, beta, h_inv, alphas, max_iters))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fields_have_mesh_sizes() {
        let v = solve_fields("problem1", 10.0, 4, "mg", 0.1).unwrap();
        assert_eq!(v.velocity.len(), v.triangles.len());
        assert_eq!(v.pressure.len(), v.vertices.len());
        assert!(v.converged);
        assert!(solve_fields("problem1", 10.0, 64, "pr", 0.1).is_err());
        assert!(solve_fields("problem1", 10.0, 4, "gmres", 0.1).is_err());
    }

    #[test]
    fn histories_start_from_same_guess() {
        let h = residual_histories("problem2", 20.0, 8, 0.05).unwrap();
        // the refined and the directly built mesh number vertices differently
        assert!((h.pr[0] - h.mg[0]).abs() < 1e-10 * h.pr[0]);
        assert!(h.mg.len() < h.pr.len());
    }

    #[test]
    fn small_alpha_beats_unit_alpha() {
        let pts = alpha_sweep("problem1", 30.0, 4, &[1.0 / 30.0, 1.0], 2000).unwrap();
        assert!(pts[0].iterations < pts[1].iterations);
    }
}
