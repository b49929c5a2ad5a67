//! Element-local Forchheimer machinery.

use crate::assembly::{AssembledOperators, DiscreteState};
use crate::linalg::{l2, l2_vec2, norm2, scale2, sub2, Sym2, Vec2};

/// Data of the unconstrained nonlinear half-step on one triangle.
#[derive(Debug, Clone, Copy)]
pub struct SplitStepInput {
    pub u: Vec2,
    pub grad_p: Vec2,
    /// Element-averaged forcing, i.e. the assembled load divided by |T|.
    pub f: Vec2,
    pub k_inv: Sym2,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub mu: f64,
}

impl SplitStepInput {
    /// Right-hand side `F = u/α − (μ/ρ)K⁻¹u − ∇p + f`.
    pub fn forcing(&self) -> Vec2 {
        let ku = self.k_inv.apply(self.u);
        let nu = self.mu / self.rho;
        [
            self.u[0] / self.alpha - nu * ku[0] - self.grad_p[0] + self.f[0],
            self.u[1] / self.alpha - nu * ku[1] - self.grad_p[1] + self.f[1],
        ]
    }
}

/// Solves `(1/α) v + (β/ρ)|v| v = F` for `v`.
///
/// The solution is parallel to `F`, so the problem reduces to a quadratic in
/// `|v|` whose positive root gives `v = F / γ` with
/// `γ = 1/(2α) + ½ √(1/α² + 4 (β/ρ) |F|)`.
pub fn closed_form_step(input: &SplitStepInput) -> Vec2 {
    let rhs = input.forcing();
    let inv_alpha = 1.0 / input.alpha;
    let gamma = 0.5 * inv_alpha + 0.5 * (inv_alpha * inv_alpha + 4.0 * input.beta / input.rho * norm2(rhs)).sqrt();
    scale2(1.0 / gamma, rhs)
}

/// Integrated nonlinear operator: |T| [(μ/ρ) K_T⁻¹ u_T + (β/ρ)|u_T| u_T] per triangle.
pub fn apply_df_operator(u: &[Vec2], ops: &AssembledOperators) -> Vec<Vec2> {
    let br = ops.beta_over_rho();
    u.iter()
        .enumerate()
        .map(|(t, &ut)| {
            let lin = ops.a_blocks[t].apply(ut);
            let s = br * ops.areas[t] * norm2(ut);
            [lin[0] + s * ut[0], lin[1] + s * ut[1]]
        })
        .collect()
}

/// `rhs_u − 𝒜(u) − B p` in assembled form.
pub fn momentum_defect(state: &DiscreteState, ops: &AssembledOperators, rhs_u: &[Vec2]) -> Vec<Vec2> {
    let au = apply_df_operator(&state.u, ops);
    let bp = ops.apply_b(&state.p);
    rhs_u.iter().zip(au.iter().zip(&bp)).map(|(&f, (&a, &b))| sub2(sub2(f, a), b)).collect()
}

/// `rhs_p − Bᵀ u`.
pub fn constraint_defect(state: &DiscreteState, ops: &AssembledOperators, rhs_p: &[f64]) -> Vec<f64> {
    let btu = ops.apply_bt(&state.u);
    rhs_p.iter().zip(&btu).map(|(w, b)| w - b).collect()
}

/// Momentum and constraint parts of the stopping criterion.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct ResidualPair {
    pub r_u: f64,
    pub r_p: f64,
    pub r: f64,
}

impl ResidualPair {
    pub fn new(r_u: f64, r_p: f64) -> Self {
        Self { r_u, r_p, r: r_u + r_p }
    }
}

fn relative(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Algebraic residuals of the assembled system against the given right-hand sides,
/// each relative to the norm of its right-hand side (absolute when that vanishes).
pub fn residual_against(state: &DiscreteState, ops: &AssembledOperators, rhs_u: &[Vec2], rhs_p: &[f64]) -> ResidualPair {
    let r_u = relative(l2_vec2(&momentum_defect(state, ops, rhs_u)), l2_vec2(rhs_u));
    let r_p = relative(l2(&constraint_defect(state, ops, rhs_p)), l2(rhs_p));
    ResidualPair::new(r_u, r_p)
}

/// Residual of the problem assembled into `ops`.
pub fn nonlinear_residual(state: &DiscreteState, ops: &AssembledOperators) -> ResidualPair {
    residual_against(state, ops, &ops.f_rhs, &ops.w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_operators, PhysicalParams};
    use crate::mesh::{build_uniform_square_mesh, Rect};

    fn input(u: Vec2, f: Vec2, alpha: f64, beta: f64) -> SplitStepInput {
        SplitStepInput { u, grad_p: [0.0; 2], f, k_inv: Sym2::identity(), alpha, beta, rho: 1.0, mu: 1.0 }
    }

    #[test]
    fn linear_limit_scales_forcing() {
        let inp = SplitStepInput { grad_p: [0.5, -1.0], ..input([0.3, 0.2], [1.0, 2.0], 0.25, 0.0) };
        let f = inp.forcing();
        let v = closed_form_step(&inp);
        assert!((v[0] - 0.25 * f[0]).abs() < 1e-15 && (v[1] - 0.25 * f[1]).abs() < 1e-15);
    }

    #[test]
    fn zero_forcing_gives_zero() {
        // F = u/α − u = 0 for α = 1, K = I
        assert_eq!(closed_form_step(&input([0.7, -0.1], [0.0; 2], 1.0, 3.0)), [0.0, 0.0]);
    }

    #[test]
    fn unit_parameters_example() {
        let v = closed_form_step(&input([0.0; 2], [3.0, 4.0], 1.0, 1.0));
        // scalar bisection on s/α + (β/ρ)s² = |F| gives s = 1.791287847..., v = F s/|F|
        assert!((v[0] - 1.074_772_708_486_752).abs() < 1e-12);
        assert!((v[1] - 1.433_030_277_982_335_8).abs() < 1e-12);
    }

    #[test]
    fn df_operator_hand_value() {
        let mut mesh = build_uniform_square_mesh(Rect::reference_square(), 1).unwrap();
        mesh.triangles.truncate(1);
        let ops = assemble_operators(&mesh, &PhysicalParams::homogeneous(2.0), 1.0).unwrap();
        assert_eq!(ops.areas[0], 2.0);
        assert_eq!(apply_df_operator(&[[3.0, 4.0]], &ops), vec![[66.0, 88.0]]);
    }

    #[test]
    fn df_operator_linear_limit_and_zero() {
        let mesh = build_uniform_square_mesh(Rect::reference_square(), 3).unwrap();
        let ops = assemble_operators(&mesh, &PhysicalParams::homogeneous(0.0), 1.0).unwrap();
        let u: Vec<Vec2> = (0..ops.num_triangles()).map(|t| [t as f64, 1.0 - t as f64]).collect();
        assert_eq!(apply_df_operator(&u, &ops), ops.apply_a(&u));
        let zero = vec![[0.0; 2]; ops.num_triangles()];
        assert!(apply_df_operator(&zero, &ops).iter().all(|v| *v == [0.0, 0.0]));
    }
}
