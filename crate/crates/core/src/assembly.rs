//! Mixed P0 (velocity) / P1 (pressure) operators and load vectors.
//!
//! Velocity unknowns are one 2-vector per triangle, pressure unknowns one
//! value per vertex. The coupling matrix `B` has entries `|T| ∇λ_i` and is
//! applied through the per-triangle hat-function gradients instead of being
//! stored; [`AssembledOperators::b_triplets`] materializes it when needed.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{add2, dot2, scale2, Sym2, Vec2};
use crate::mesh::{MeshLevel, Side};
use crate::quadrature::{integrate_triangle, EDGE_GAUSS3, TRIANGLE_DEG4, barycentric_point};

pub type ScalarField = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;
pub type TensorField = Arc<dyn Fn(Vec2) -> Sym2 + Send + Sync>;
/// Normal flux prescribed on a boundary side.
pub type BoundaryFlux = Arc<dyn Fn(Vec2, Side) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Permeability {
    Scalar(ScalarField),
    Tensor(TensorField),
}

impl Permeability {
    pub fn identity() -> Self {
        Permeability::Scalar(Arc::new(|_| 1.0))
    }

    pub fn constant(k: f64) -> Self {
        Permeability::Scalar(Arc::new(move |_| k))
    }

    pub fn sample(&self, x: Vec2) -> Sym2 {
        match self {
            Permeability::Scalar(k) => Sym2::scalar(k(x)),
            Permeability::Tensor(k) => k(x),
        }
    }
}

impl fmt::Debug for Permeability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Permeability::Scalar(_) => f.write_str("Permeability::Scalar(..)"),
            Permeability::Tensor(_) => f.write_str("Permeability::Tensor(..)"),
        }
    }
}

/// Coefficients and data of the Darcy-Forchheimer problem.
#[derive(Clone)]
pub struct PhysicalParams {
    pub mu: f64,
    pub rho: f64,
    pub beta: f64,
    pub permeability: Permeability,
    pub f: VectorField,
    pub g: ScalarField,
    pub g_n: BoundaryFlux,
}

impl fmt::Debug for PhysicalParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhysicalParams")
            .field("mu", &self.mu)
            .field("rho", &self.rho)
            .field("beta", &self.beta)
            .field("permeability", &self.permeability)
            .finish_non_exhaustive()
    }
}

impl PhysicalParams {
    /// μ = ρ = 1, K = I and all data zero.
    pub fn homogeneous(beta: f64) -> Self {
        Self {
            mu: 1.0,
            rho: 1.0,
            beta,
            permeability: Permeability::identity(),
            f: Arc::new(|_| [0.0, 0.0]),
            g: Arc::new(|_| 0.0),
            g_n: Arc::new(|_, _| 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Parameter(format!("viscosity must be positive, got {}", self.mu)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Parameter(format!("density must be positive, got {}", self.rho)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Parameter(format!("Forchheimer number must be nonnegative, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Velocity/pressure pair on one level.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    /// One constant velocity per triangle.
    pub u: Vec<Vec2>,
    /// Nodal pressure values, zero mean.
    pub p: Vec<f64>,
}

impl DiscreteState {
    pub fn zeros(num_triangles: usize, num_vertices: usize) -> Self {
        Self { u: vec![[0.0; 2]; num_triangles], p: vec![0.0; num_vertices] }
    }
}

/// Per-level matrices and right-hand sides.
#[derive(Debug, Clone)]
pub struct AssembledOperators {
    pub mu: f64,
    pub rho: f64,
    pub beta: f64,
    pub triangles: Vec<[usize; 3]>,
    pub num_vertices: usize,
    pub areas: Vec<f64>,
    /// Gradients of the three hat functions, constant on each triangle.
    pub gradients: Vec<[Vec2; 3]>,
    /// Element average of K⁻¹.
    pub k_inv: Vec<Sym2>,
    /// Blocks of `A`: (μ/ρ)|T| K_T⁻¹.
    pub a_blocks: Vec<Sym2>,
    pub alpha: f64,
    /// Blocks of `A_α = A + (1/α)|T| I`.
    pub a_alpha_blocks: Vec<Sym2>,
    /// ∫ f·φ per triangle; also the right-hand side of the Darcy initializer.
    pub f_rhs: Vec<Vec2>,
    /// −∫ g λ_i + ∮ g_N λ_i.
    pub w: Vec<f64>,
    /// ∫ λ_i, used for the zero-mean condition.
    pub vertex_weights: Vec<f64>,
    pub warnings: Vec<String>,
}

pub fn hat_gradients(tri: &[Vec2; 3], area: f64) -> [Vec2; 3] {
    let inv = 1.0 / (2.0 * area);
    let grad = |j: usize, k: usize| [(tri[j][1] - tri[k][1]) * inv, (tri[k][0] - tri[j][0]) * inv];
    [grad(1, 2), grad(2, 0), grad(0, 1)]
}

/// ∫_T f dx for every triangle (degree-4 quadrature).
pub fn assemble_velocity_load(mesh: &MeshLevel, f: &(dyn Fn(Vec2) -> Vec2 + Send + Sync)) -> Vec<Vec2> {
    (0..mesh.num_triangles())
        .map(|t| {
            let tri = mesh.corners(t);
            let area = mesh.signed_area(t);
            TRIANGLE_DEG4.iter().fold([0.0; 2], |acc, &(bary, wq)| {
                add2(acc, scale2(wq * area, f(barycentric_point(&tri, bary))))
            })
        })
        .collect()
}

/// Pressure-equation right-hand side and its total, which vanishes for compatible data.
#[derive(Debug, Clone)]
pub struct PressureRhs {
    pub w: Vec<f64>,
    pub imbalance: f64,
}

pub fn assemble_pressure_rhs(
    mesh: &MeshLevel,
    g: &(dyn Fn(Vec2) -> f64 + Send + Sync),
    g_n: &(dyn Fn(Vec2, Side) -> f64 + Send + Sync),
) -> PressureRhs {
    let mut w = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let corners = mesh.corners(t);
        let area = mesh.signed_area(t);
        for (local, &v) in tri.iter().enumerate() {
            w[v] -= integrate_triangle(&corners, area, |x, bary| g(x) * bary[local]);
        }
    }
    for edge in &mesh.boundary_edges {
        let [a, b] = edge.vertices;
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        for &(s, wq) in &EDGE_GAUSS3 {
            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let flux = wq * edge.length * g_n(x, edge.side);
            w[a] += flux * (1.0 - s);
            w[b] += flux * s;
        }
    }
    let imbalance = w.iter().sum();
    PressureRhs { w, imbalance }
}

pub fn vertex_weights(mesh: &MeshLevel) -> Vec<f64> {
    let mut weights = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let third = mesh.signed_area(t) / 3.0;
        for &v in tri {
            weights[v] += third;
        }
    }
    weights
}

pub fn assemble_operators(mesh: &MeshLevel, params: &PhysicalParams, alpha: f64) -> Result<AssembledOperators> {
    params.validate()?;
    if !(alpha > 0.0) {
        return Err(Error::Parameter(format!("splitting parameter must be positive, got {alpha}")));
    }
    let nt = mesh.num_triangles();
    let mut areas = Vec::with_capacity(nt);
    let mut gradients = Vec::with_capacity(nt);
    let mut k_inv = Vec::with_capacity(nt);
    for t in 0..nt {
        let tri = mesh.corners(t);
        let area = mesh.signed_area(t);
        if area <= 0.0 {
            return Err(Error::InvalidArgument(format!("triangle {t} is not counterclockwise")));
        }
        let mut avg = Sym2::default();
        for &(bary, wq) in &TRIANGLE_DEG4 {
            let x = barycentric_point(&tri, bary);
            let k = params.permeability.sample(x);
            if !(k.min_eigenvalue() > 0.0) {
                return Err(Error::Parameter(format!("permeability is not SPD at {x:?}: {k:?}")));
            }
            let inv = k.inverse().expect("SPD matrix is invertible");
            avg = avg + wq * inv;
        }
        areas.push(area);
        gradients.push(hat_gradients(&tri, area));
        k_inv.push(avg);
    }
    let nu = params.mu / params.rho;
    let a_blocks: Vec<Sym2> = areas.iter().zip(&k_inv).map(|(&a, &k)| (nu * a) * k).collect();
    let a_alpha_blocks = shifted_blocks(&a_blocks, &areas, 1.0 / alpha);

    let f_rhs = assemble_velocity_load(mesh, params.f.as_ref());
    let PressureRhs { w, imbalance } = assemble_pressure_rhs(mesh, params.g.as_ref(), params.g_n.as_ref());
    let scale = w.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
    let mut warnings = Vec::new();
    if imbalance.abs() > 1e-10 * scale {
        warnings.push(format!("incompatible data: sum of pressure right-hand side is {imbalance:e}"));
    }

    Ok(AssembledOperators {
        mu: params.mu,
        rho: params.rho,
        beta: params.beta,
        triangles: mesh.triangles.clone(),
        num_vertices: mesh.num_vertices(),
        areas,
        gradients,
        k_inv,
        a_blocks,
        alpha,
        a_alpha_blocks,
        f_rhs,
        w,
        vertex_weights: vertex_weights(mesh),
        warnings,
    })
}

/// `blocks + shift·|T|·I`, elementwise.
pub fn shifted_blocks(blocks: &[Sym2], areas: &[f64], shift: f64) -> Vec<Sym2> {
    blocks.iter().zip(areas).map(|(&b, &a)| b + Sym2::scalar(shift * a)).collect()
}

impl AssembledOperators {
    pub fn num_triangles(&self) -> usize {
        self.areas.len()
    }

    pub fn mu_over_rho(&self) -> f64 {
        self.mu / self.rho
    }

    pub fn beta_over_rho(&self) -> f64 {
        self.beta / self.rho
    }

    /// Blocks of `A + (1/α)|T| I`; α = ∞ gives `A` itself.
    pub fn a_alpha_blocks_for(&self, alpha: f64) -> Vec<Sym2> {
        if alpha == self.alpha {
            return self.a_alpha_blocks.clone();
        }
        shifted_blocks(&self.a_blocks, &self.areas, 1.0 / alpha)
    }

    /// Constant gradient of a P1 function on triangle `t`.
    pub fn gradient_on(&self, t: usize, p: &[f64]) -> Vec2 {
        let [i, j, k] = self.triangles[t];
        let g = &self.gradients[t];
        [
            p[i] * g[0][0] + p[j] * g[1][0] + p[k] * g[2][0],
            p[i] * g[0][1] + p[j] * g[1][1] + p[k] * g[2][1],
        ]
    }

    /// `B p`: |T| ∇p_T per triangle.
    pub fn apply_b(&self, p: &[f64]) -> Vec<Vec2> {
        (0..self.num_triangles()).map(|t| scale2(self.areas[t], self.gradient_on(t, p))).collect()
    }

    /// `Bᵀ u`: Σ_T |T| ∇λ_i · u_T per vertex.
    pub fn apply_bt(&self, u: &[Vec2]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vertices];
        for (t, tri) in self.triangles.iter().enumerate() {
            let au = scale2(self.areas[t], u[t]);
            for (local, &v) in tri.iter().enumerate() {
                out[v] += dot2(self.gradients[t][local], au);
            }
        }
        out
    }

    /// `A u` blockwise.
    pub fn apply_a(&self, u: &[Vec2]) -> Vec<Vec2> {
        self.a_blocks.iter().zip(u).map(|(b, &x)| b.apply(x)).collect()
    }

    /// Entries of `B` as (row, col, value) with velocity row `2t + c`.
    pub fn b_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(6 * self.num_triangles());
        for (t, tri) in self.triangles.iter().enumerate() {
            for (local, &v) in tri.iter().enumerate() {
                for c in 0..2 {
                    out.push((2 * t + c, v, self.areas[t] * self.gradients[t][local][c]));
                }
            }
        }
        out
    }

    /// ∫ p / |Ω|.
    pub fn mean(&self, p: &[f64]) -> f64 {
        let total: f64 = self.vertex_weights.iter().sum();
        self.vertex_weights.iter().zip(p).map(|(w, x)| w * x).sum::<f64>() / total
    }

    /// Shifts `p` so that ∫ p = 0.
    pub fn project_zero_mean(&self, p: &mut [f64]) {
        let mean = self.mean(p);
        p.iter_mut().for_each(|x| *x -= mean);
    }
}
