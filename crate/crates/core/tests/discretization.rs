use std::sync::Arc;

use dfmg::assembly::{assemble_operators, assemble_velocity_load, Permeability};
use dfmg::level::solve_darcy_initializer;
use dfmg::linalg::{Sym2, Vec2};
use dfmg::mesh::build_uniform_square_mesh;
use dfmg::saddle::{schur_entries, SaddleCache};
use dfmg::{LinearSolverKind, Level, PhysicalParams, Rect, Side};

fn dense(n: usize, entries: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for &(i, j, v) in entries {
        m[i][j] += v;
    }
    m
}

#[test]
fn schur_complement_of_two_triangles_by_hand() {
    // [-1,1]², one square cut along (-1,-1)-(1,1); |T| = 2, A_T = 2 I.
    let mesh = build_uniform_square_mesh(Rect::reference_square(), 1).unwrap();
    let ops = assemble_operators(&mesh, &PhysicalParams::homogeneous(0.0), f64::INFINITY).unwrap();
    let m = dense(4, &schur_entries(&ops, &ops.a_blocks).unwrap());
    let want = [
        [1.0, -0.5, -0.5, 0.0],
        [-0.5, 1.0, 0.0, -0.5],
        [-0.5, 0.0, 1.0, -0.5],
        [0.0, -0.5, -0.5, 1.0],
    ];
    for i in 0..4 {
        for j in 0..4 {
            assert!((m[i][j] - want[i][j]).abs() < 1e-14, "M[{i}][{j}] = {}", m[i][j]);
        }
    }
}

#[test]
fn schur_entries_match_dense_product() {
    let mesh = build_uniform_square_mesh(Rect::new(0.0, 2.0, 0.0, 1.0), 3).unwrap();
    let mut params = PhysicalParams::homogeneous(5.0);
    params.permeability = Permeability::Tensor(Arc::new(|x: Vec2| Sym2::new(2.0 + x[0], 0.3, 1.0 + x[1])));
    let ops = assemble_operators(&mesh, &params, 0.5).unwrap();
    let nv = mesh.num_vertices();
    let m = dense(nv, &schur_entries(&ops, &ops.a_alpha_blocks).unwrap());
    let mut b = vec![vec![0.0; nv]; 2 * mesh.num_triangles()];
    for (r, c, v) in ops.b_triplets() {
        b[r][c] += v;
    }
    for i in 0..nv {
        for j in 0..nv {
            let mut s = 0.0;
            for t in 0..mesh.num_triangles() {
                let inv = ops.a_alpha_blocks[t].inverse().unwrap();
                let bi = [b[2 * t][i], b[2 * t + 1][i]];
                let bj = [b[2 * t][j], b[2 * t + 1][j]];
                s += inv.quad_form(bi, bj);
            }
            assert!((m[i][j] - s).abs() < 1e-12);
        }
    }
}

/// ∫_T f by splitting `depth` times into four and using the centroid rule.
fn subdivided(tri: [Vec2; 3], depth: u32, f: &dyn Fn(Vec2) -> Vec2) -> Vec2 {
    if depth == 0 {
        let c = [(tri[0][0] + tri[1][0] + tri[2][0]) / 3.0, (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0];
        let area = 0.5 * ((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1]) - (tri[2][0] - tri[0][0]) * (tri[1][1] - tri[0][1])).abs();
        let v = f(c);
        return [v[0] * area, v[1] * area];
    }
    let mid = |a: Vec2, b: Vec2| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let (m01, m12, m20) = (mid(tri[0], tri[1]), mid(tri[1], tri[2]), mid(tri[2], tri[0]));
    [[tri[0], m01, m20], [m01, tri[1], m12], [m20, m12, tri[2]], [m01, m12, m20]]
        .iter()
        .map(|t| subdivided(*t, depth - 1, f))
        .fold([0.0; 2], |a, b| [a[0] + b[0], a[1] + b[1]])
}

#[test]
fn velocity_load_matches_subdivided_quadrature() {
    let mesh = build_uniform_square_mesh(Rect::reference_square(), 4).unwrap();
    let f = |x: Vec2| [(2.0 * x[0]).sin() * x[1].exp(), 1.0 / (2.0 + x[0] * x[1])];
    let load = assemble_velocity_load(&mesh, &f);
    for t in 0..mesh.num_triangles() {
        let want = subdivided(mesh.corners(t), 6, &f);
        for d in 0..2 {
            assert!((load[t][d] - want[d]).abs() < 1e-4 * mesh.signed_area(t), "triangle {t}: {:?} vs {want:?}", load[t]);
        }
    }
}

#[test]
fn uniform_darcy_flow_is_reproduced_exactly() {
    let mut params = PhysicalParams::homogeneous(0.0);
    params.f = Arc::new(|_| [1.0, 0.0]);
    params.g_n = Arc::new(|_, side: Side| side.outward_normal()[0]);
    for kind in [LinearSolverKind::Schur, LinearSolverKind::Direct, LinearSolverKind::Cg] {
        let level = Level::new(build_uniform_square_mesh(Rect::reference_square(), 6).unwrap(), &params, 1.0, kind).unwrap();
        assert!(level.ops.warnings.is_empty());
        let s = solve_darcy_initializer(&level).unwrap();
        for u in &s.u {
            assert!((u[0] - 1.0).abs() < 1e-8 && u[1].abs() < 1e-8, "{kind}: {u:?}");
        }
        assert!(s.p.iter().all(|p| p.abs() < 1e-8), "{kind}");
    }
}

#[test]
fn direct_and_schur_agree_on_random_rhs() {
    use rand::{rngs::StdRng, Rng, SeedableRng};
    let mesh = build_uniform_square_mesh(Rect::reference_square(), 8).unwrap();
    let ops = assemble_operators(&mesh, &PhysicalParams::homogeneous(10.0), 0.1).unwrap();
    let schur = SaddleCache::new(LinearSolverKind::Schur).for_alpha(&ops, 0.1).unwrap();
    let direct = SaddleCache::new(LinearSolverKind::Direct).for_alpha(&ops, 0.1).unwrap();
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..100 {
        let ru: Vec<Vec2> = (0..mesh.num_triangles()).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let mut rp: Vec<f64> = (0..mesh.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = rp.iter().sum::<f64>() / rp.len() as f64;
        rp.iter_mut().for_each(|x| *x -= mean);
        let (a, b) = (schur.solve(&ops, &ru, &rp), direct.solve(&ops, &ru, &rp));
        let scale = a.p.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        for (x, y) in a.p.iter().zip(&b.p) {
            assert!((x - y).abs() <= 1e-9 * scale);
        }
        for (x, y) in a.u.iter().zip(&b.u) {
            assert!((x[0] - y[0]).abs() <= 1e-9 * scale && (x[1] - y[1]).abs() <= 1e-9 * scale);
        }
    }
}
