//! Manufactured test problems on (-1, 1)² with μ = ρ = 1, K = I and g = 0.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::{DiscreteState, Permeability, PhysicalParams};
use crate::error::{Error, Result};
use crate::linalg::{norm2, sub2, Vec2};
use crate::mesh::{MeshLevel, Rect, Side};
use crate::quadrature::integrate_triangle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemName {
    Problem1,
    Problem2,
}

impl FromStr for ProblemName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "problem1" | "p1" | "1" => Ok(Self::Problem1),
            "problem2" | "p2" | "2" => Ok(Self::Problem2),
            _ => Err(Error::UnknownProblem(s.to_string())),
        }
    }
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Problem1 => "problem1",
            Self::Problem2 => "problem2",
        })
    }
}

/// Closed-form solution together with the data it generates.
#[derive(Clone)]
pub struct ManufacturedProblem {
    pub name: ProblemName,
    pub beta: f64,
    pub params: PhysicalParams,
    exact_u: fn(Vec2) -> Vec2,
}

impl fmt::Debug for ManufacturedProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedProblem").field("name", &self.name).field("beta", &self.beta).finish()
    }
}

fn u1(x: Vec2) -> Vec2 {
    [x[0] + x[1], x[0] - x[1]]
}

fn u2(x: Vec2) -> Vec2 {
    let (a, b) = (x[0] + 1.0, x[1] + 1.0);
    [a * a / 4.0, -a * b / 2.0]
}

fn f1(beta: f64, x: Vec2) -> Vec2 {
    let (px, py) = (x[0], x[1]);
    let factor = 1.0 + beta * (2.0 * px * px + 2.0 * py * py).sqrt();
    [factor * (px + py) + 3.0 * px * px, factor * (px - py) + 3.0 * py * py]
}

fn f2(beta: f64, x: Vec2) -> Vec2 {
    let (a, b) = (x[0] + 1.0, x[1] + 1.0);
    let factor = 1.0 + beta * a / 4.0 * (a * a + 4.0 * b * b).sqrt();
    [a * a / 4.0 * factor + 3.0 * x[0] * x[0], -a * b / 2.0 * factor + 3.0 * x[1] * x[1]]
}

fn g_n1(x: Vec2, side: Side) -> f64 {
    match side {
        Side::XPlus => 1.0 + x[1],
        Side::XMinus => 1.0 - x[1],
        Side::YPlus => x[0] - 1.0,
        Side::YMinus => -x[0] - 1.0,
    }
}

fn g_n2(x: Vec2, side: Side) -> f64 {
    match side {
        Side::XPlus => 1.0,
        Side::XMinus => 0.0,
        Side::YPlus => -x[0] - 1.0,
        Side::YMinus => 0.0,
    }
}

pub fn make_problem(name: ProblemName, beta: f64) -> Result<ManufacturedProblem> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("Forchheimer number must be nonnegative, got {beta}")));
    }
    let (exact_u, f, g_n): (fn(Vec2) -> Vec2, fn(f64, Vec2) -> Vec2, fn(Vec2, Side) -> f64) = match name {
        ProblemName::Problem1 => (u1, f1, g_n1),
        ProblemName::Problem2 => (u2, f2, g_n2),
    };
    let params = PhysicalParams {
        mu: 1.0,
        rho: 1.0,
        beta,
        permeability: Permeability::identity(),
        f: Arc::new(move |x| f(beta, x)),
        g: Arc::new(|_| 0.0),
        g_n: Arc::new(g_n),
    };
    Ok(ManufacturedProblem { name, beta, params, exact_u })
}

impl ManufacturedProblem {
    pub fn domain(&self) -> Rect {
        Rect::reference_square()
    }

    pub fn exact_u(&self, x: Vec2) -> Vec2 {
        (self.exact_u)(x)
    }

    /// p = x³ + y³ for both problems.
    pub fn exact_p(&self, x: Vec2) -> f64 {
        x[0].powi(3) + x[1].powi(3)
    }

    pub fn exact_grad_p(&self, x: Vec2) -> Vec2 {
        [3.0 * x[0] * x[0], 3.0 * x[1] * x[1]]
    }

    /// Elementwise mean of the exact velocity and nodal values of the exact pressure.
    pub fn interpolant(&self, mesh: &MeshLevel) -> DiscreteState {
        let u = (0..mesh.num_triangles())
            .map(|t| {
                let tri = mesh.corners(t);
                let area = mesh.signed_area(t);
                let ux = integrate_triangle(&tri, area, |x, _| self.exact_u(x)[0]) / area;
                let uy = integrate_triangle(&tri, area, |x, _| self.exact_u(x)[1]) / area;
                [ux, uy]
            })
            .collect();
        let p = mesh.vertices.iter().map(|&v| self.exact_p(v)).collect();
        DiscreteState { u, p }
    }
}

/// Discretization errors of one solution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ErrorReport {
    /// ‖u − u_h‖_{L²}
    pub err_u_l2: f64,
    /// ‖∇(p − p_h)‖_{L²}
    pub err_p_h1: f64,
    /// ‖∇(p − p_h)‖_{L^{3/2}}
    pub err_p_w1_32: f64,
}

pub fn compute_errors(state: &DiscreteState, problem: &ManufacturedProblem, mesh: &MeshLevel) -> ErrorReport {
    let (mut eu, mut ep, mut ep32) = (0.0, 0.0, 0.0);
    for t in 0..mesh.num_triangles() {
        let tri = mesh.corners(t);
        let area = mesh.signed_area(t);
        let [i, j, k] = mesh.triangles[t];
        let grads = crate::assembly::hat_gradients(&tri, area);
        let gp = [
            state.p[i] * grads[0][0] + state.p[j] * grads[1][0] + state.p[k] * grads[2][0],
            state.p[i] * grads[0][1] + state.p[j] * grads[1][1] + state.p[k] * grads[2][1],
        ];
        let uh = state.u[t];
        eu += integrate_triangle(&tri, area, |x, _| norm2(sub2(uh, problem.exact_u(x))).powi(2));
        ep += integrate_triangle(&tri, area, |x, _| norm2(sub2(gp, problem.exact_grad_p(x))).powi(2));
        ep32 += integrate_triangle(&tri, area, |x, _| norm2(sub2(gp, problem.exact_grad_p(x))).powf(1.5));
    }
    ErrorReport { err_u_l2: eu.sqrt(), err_p_h1: ep.sqrt(), err_p_w1_32: ep32.powf(2.0 / 3.0) }
}

/// Experimental order of convergence for one halving of h.
pub fn eoc(err_coarse: f64, err_fine: f64) -> f64 {
    (err_coarse / err_fine).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_uniform_square_mesh;

    #[test]
    fn forcing_vanishes_at_origin() {
        let p = make_problem(ProblemName::Problem1, 30.0).unwrap();
        assert_eq!((p.params.f)([0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn boundary_flux_value() {
        let p = make_problem(ProblemName::Problem1, 30.0).unwrap();
        assert_eq!((p.params.g_n)([1.0, 0.5], Side::XPlus), 1.5);
    }

    #[test]
    fn second_problem_is_divergence_free() {
        let p = make_problem(ProblemName::Problem2, 10.0).unwrap();
        let h = 1e-5;
        for &x in &[[0.3, -0.2], [-0.9, 0.9], [0.5, 0.5]] {
            let dudx = (p.exact_u([x[0] + h, x[1]])[0] - p.exact_u([x[0] - h, x[1]])[0]) / (2.0 * h);
            let dvdy = (p.exact_u([x[0], x[1] + h])[1] - p.exact_u([x[0], x[1] - h])[1]) / (2.0 * h);
            assert!((dudx + dvdy).abs() < 1e-9);
        }
    }

    #[test]
    fn names_parse() {
        assert_eq!("Problem1".parse::<ProblemName>().unwrap(), ProblemName::Problem1);
        assert_eq!("2".parse::<ProblemName>().unwrap(), ProblemName::Problem2);
        assert!(matches!("problem3".parse::<ProblemName>(), Err(Error::UnknownProblem(_))));
        assert!(make_problem(ProblemName::Problem1, -1.0).is_err());
    }

    #[test]
    fn interpolation_error_is_first_order() {
        let p = make_problem(ProblemName::Problem1, 30.0).unwrap();
        let errs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let mesh = build_uniform_square_mesh(p.domain(), n).unwrap();
                compute_errors(&p.interpolant(&mesh), &p, &mesh).err_u_l2
            })
            .collect();
        assert!(errs.iter().all(|&e| e > 0.0));
        for w in errs.windows(2) {
            assert!((eoc(w[0], w[1]) - 1.0).abs() < 0.05, "{errs:?}");
        }
    }
}
