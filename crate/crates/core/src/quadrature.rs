//! Quadrature rules on triangles and boundary edges.

use crate::linalg::Vec2;

const A1: f64 = 0.445_948_490_915_964_886_32;
const B1: f64 = 0.108_103_018_168_070_227_36;
const W1: f64 = 0.223_381_589_678_011_465_70;
const A2: f64 = 0.091_576_213_509_770_743_46;
const B2: f64 = 0.816_847_572_980_458_513_08;
const W2: f64 = 0.109_951_743_655_321_867_64;

/// 6-point symmetric rule, exact for polynomials of degree 4.
/// Barycentric coordinates and weights normalized to sum to one.
pub const TRIANGLE_DEG4: [([f64; 3], f64); 6] = [
    ([A1, A1, B1], W1),
    ([A1, B1, A1], W1),
    ([B1, A1, A1], W1),
    ([A2, A2, B2], W2),
    ([A2, B2, A2], W2),
    ([B2, A2, A2], W2),
];

/// 3-point Gauss-Legendre rule on [0, 1] (node, weight), weights sum to one.
pub const EDGE_GAUSS3: [(f64, f64); 3] = {
    // sqrt(3/5) / 2
    const D: f64 = 0.387_298_334_620_741_7;
    [(0.5 - D, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + D, 5.0 / 18.0)]
};

pub fn barycentric_point(tri: &[Vec2; 3], bary: [f64; 3]) -> Vec2 {
    [
        bary[0] * tri[0][0] + bary[1] * tri[1][0] + bary[2] * tri[2][0],
        bary[0] * tri[0][1] + bary[1] * tri[1][1] + bary[2] * tri[2][1],
    ]
}

/// Integral of `f` over the triangle with the degree-4 rule.
pub fn integrate_triangle<F>(tri: &[Vec2; 3], area: f64, mut f: F) -> f64
where
    F: FnMut(Vec2, [f64; 3]) -> f64,
{
    TRIANGLE_DEG4
        .iter()
        .map(|&(bary, w)| w * f(barycentric_point(tri, bary), bary))
        .sum::<f64>()
        * area
}
