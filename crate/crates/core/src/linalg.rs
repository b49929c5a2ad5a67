//! Small dense helpers: 2-vectors and symmetric 2×2 blocks.

use std::ops::{Add, Mul};

pub type Vec2 = [f64; 2];

#[inline]
pub fn norm2(v: Vec2) -> f64 {
    v[0].hypot(v[1])
}

#[inline]
pub fn dot2(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn scale2(s: f64, v: Vec2) -> Vec2 {
    [s * v[0], s * v[1]]
}

#[inline]
pub fn add2(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub2(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    pub const fn scalar(s: f64) -> Self {
        Self::new(s, 0.0, s)
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Closed-form inverse; `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Self::new(self.yy / det, -self.xy / det, self.xx / det))
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        mean - half_diff.hypot(self.xy)
    }

    pub fn quad_form(&self, a: Vec2, b: Vec2) -> f64 {
        dot2(a, self.apply(b))
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, rhs: Sym2) -> Sym2 {
        Sym2::new(self.xx + rhs.xx, self.xy + rhs.xy, self.yy + rhs.yy)
    }
}

impl Mul<Sym2> for f64 {
    type Output = Sym2;
    fn mul(self, rhs: Sym2) -> Sym2 {
        Sym2::new(self * rhs.xx, self * rhs.xy, self * rhs.yy)
    }
}

/// Euclidean norm of a flat slice.
pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean norm of a velocity-space vector.
pub fn l2_vec2(v: &[Vec2]) -> f64 {
    v.iter().map(|x| x[0] * x[0] + x[1] * x[1]).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs_diff_vec2(a: &[Vec2], b: &[Vec2]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x[0] - y[0]).abs().max((x[1] - y[1]).abs()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let m = Sym2::new(2.0, 0.5, 3.0);
        let inv = m.inverse().unwrap();
        let v = inv.apply(m.apply([1.25, -0.75]));
        assert!((v[0] - 1.25).abs() < 1e-14 && (v[1] + 0.75).abs() < 1e-14);
    }

    #[test]
    fn min_eigenvalue_of_diagonal() {
        assert_eq!(Sym2::new(4.0, 0.0, 1.5).min_eigenvalue(), 1.5);
        assert!(Sym2::new(1.0, 2.0, 1.0).min_eigenvalue() < 0.0);
    }
}
