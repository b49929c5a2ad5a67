//! Intergrid transfers between two nested levels.
//!
//! | operator            | velocity (P0)                 | pressure (P1)                   |
//! |---------------------|-------------------------------|---------------------------------|
//! | prolongation        | parent value copied to children | nodal interpolation           |
//! | residual restriction| transpose: children summed    | transpose of interpolation      |
//! | state restriction   | area-weighted child average   | injection at coarse vertices    |

use crate::assembly::{AssembledOperators, DiscreteState};
use crate::error::{Error, Result};
use crate::linalg::{add2, scale2, Vec2};
use crate::mesh::{MeshHierarchy, MeshLevel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexSource {
    Embedded(usize),
    Midpoint(usize, usize),
}

#[derive(Debug, Clone)]
pub struct TransferOps {
    pub child_map: Vec<[usize; 4]>,
    pub vertex_sources: Vec<VertexSource>,
    pub num_coarse_vertices: usize,
    fine_areas: Vec<f64>,
    coarse_areas: Vec<f64>,
}

impl TransferOps {
    /// Transfers between `hierarchy.levels[k]` and `hierarchy.levels[k + 1]`.
    pub fn from_hierarchy(hierarchy: &MeshHierarchy, k: usize) -> Result<Self> {
        if k + 1 >= hierarchy.num_levels() {
            return Err(Error::InvalidArgument(format!("no level above {k}")));
        }
        let coarse = &hierarchy.levels[k];
        let fine = &hierarchy.levels[k + 1];
        let mut vertex_sources = vec![None; fine.num_vertices()];
        for (c, &f) in hierarchy.vertex_embeddings[k].iter().enumerate() {
            vertex_sources[f] = Some(VertexSource::Embedded(c));
        }
        for (&(a, b), &f) in &hierarchy.edge_midpoint_maps[k] {
            vertex_sources[f] = Some(VertexSource::Midpoint(a, b));
        }
        let vertex_sources = vertex_sources
            .into_iter()
            .enumerate()
            .map(|(v, s)| s.ok_or_else(|| Error::InvalidArgument(format!("fine vertex {v} has no coarse source"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            child_map: hierarchy.child_maps[k].clone(),
            vertex_sources,
            num_coarse_vertices: coarse.num_vertices(),
            fine_areas: areas(fine),
            coarse_areas: areas(coarse),
        })
    }

    pub fn num_fine_triangles(&self) -> usize {
        self.fine_areas.len()
    }

    pub fn prolong_u(&self, coarse: &[Vec2]) -> Vec<Vec2> {
        let mut fine = vec![[0.0; 2]; self.num_fine_triangles()];
        for (t, children) in self.child_map.iter().enumerate() {
            for &c in children {
                fine[c] = coarse[t];
            }
        }
        fine
    }

    pub fn restrict_u_residual(&self, fine: &[Vec2]) -> Vec<Vec2> {
        self.child_map.iter().map(|ch| ch.iter().fold([0.0; 2], |acc, &c| add2(acc, fine[c]))).collect()
    }

    pub fn restrict_u_state(&self, fine: &[Vec2]) -> Vec<Vec2> {
        self.child_map
            .iter()
            .zip(&self.coarse_areas)
            .map(|(ch, &area)| {
                let sum = ch.iter().fold([0.0; 2], |acc, &c| add2(acc, scale2(self.fine_areas[c], fine[c])));
                scale2(1.0 / area, sum)
            })
            .collect()
    }

    pub fn prolong_p(&self, coarse: &[f64]) -> Vec<f64> {
        self.vertex_sources
            .iter()
            .map(|s| match *s {
                VertexSource::Embedded(c) => coarse[c],
                VertexSource::Midpoint(a, b) => 0.5 * (coarse[a] + coarse[b]),
            })
            .collect()
    }

    pub fn restrict_p_residual(&self, fine: &[f64]) -> Vec<f64> {
        let mut coarse = vec![0.0; self.num_coarse_vertices];
        for (s, &r) in self.vertex_sources.iter().zip(fine) {
            match *s {
                VertexSource::Embedded(c) => coarse[c] += r,
                VertexSource::Midpoint(a, b) => {
                    coarse[a] += 0.5 * r;
                    coarse[b] += 0.5 * r;
                }
            }
        }
        coarse
    }

    pub fn restrict_p_state(&self, fine: &[f64]) -> Vec<f64> {
        let mut coarse = vec![0.0; self.num_coarse_vertices];
        for (v, s) in self.vertex_sources.iter().enumerate() {
            if let VertexSource::Embedded(c) = *s {
                coarse[c] = fine[v];
            }
        }
        coarse
    }

    /// Velocity prolongation as (fine row, coarse col, value) over scalar components.
    pub fn prolong_u_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (t, ch) in self.child_map.iter().enumerate() {
            for &c in ch {
                out.push((2 * c, 2 * t, 1.0));
                out.push((2 * c + 1, 2 * t + 1, 1.0));
            }
        }
        out
    }

    pub fn prolong_p_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (v, s) in self.vertex_sources.iter().enumerate() {
            match *s {
                VertexSource::Embedded(c) => out.push((v, c, 1.0)),
                VertexSource::Midpoint(a, b) => {
                    out.push((v, a, 0.5));
                    out.push((v, b, 0.5));
                }
            }
        }
        out
    }
}

fn areas(mesh: &MeshLevel) -> Vec<f64> {
    (0..mesh.num_triangles()).map(|t| mesh.signed_area(t)).collect()
}

/// Fine approximation to the coarse level, pressure shifted to zero mean.
pub fn restrict_state(fine: &DiscreteState, xfer: &TransferOps, coarse_ops: &AssembledOperators) -> DiscreteState {
    let u = xfer.restrict_u_state(&fine.u);
    let mut p = xfer.restrict_p_state(&fine.p);
    coarse_ops.project_zero_mean(&mut p);
    DiscreteState { u, p }
}

/// Assembled (dual) residuals to the coarse level.
pub fn restrict_residual(res_u: &[Vec2], res_p: &[f64], xfer: &TransferOps) -> (Vec<Vec2>, Vec<f64>) {
    (xfer.restrict_u_residual(res_u), xfer.restrict_p_residual(res_p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;

    fn two_level() -> (MeshHierarchy, TransferOps) {
        let h = MeshHierarchy::uniform(Rect::reference_square(), 2, 2).unwrap();
        let x = TransferOps::from_hierarchy(&h, 0).unwrap();
        (h, x)
    }

    #[test]
    fn coarse_constant_fields_survive_round_trip() {
        let (h, x) = two_level();
        let coarse: Vec<Vec2> = (0..h.levels[0].num_triangles()).map(|t| [t as f64, -(t as f64)]).collect();
        assert_eq!(x.restrict_u_state(&x.prolong_u(&coarse)), coarse);
        let p: Vec<f64> = (0..h.levels[0].num_vertices()).map(|v| v as f64 * 0.5).collect();
        assert_eq!(x.restrict_p_state(&x.prolong_p(&p)), p);
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let (h, x) = two_level();
        let f = |v: Vec2| 2.0 * v[0] - v[1] + 0.25;
        let coarse: Vec<f64> = h.levels[0].vertices.iter().map(|&v| f(v)).collect();
        let fine = x.prolong_p(&coarse);
        for (v, &val) in h.levels[1].vertices.iter().zip(&fine) {
            assert!((val - f(*v)).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_test_function_invariant_under_restriction() {
        let (h, x) = two_level();
        let r: Vec<f64> = (0..h.levels[1].num_vertices()).map(|v| (v as f64).sin()).collect();
        let total: f64 = r.iter().sum();
        let coarse_total: f64 = x.restrict_p_residual(&r).iter().sum();
        assert!((total - coarse_total).abs() < 1e-13);
        assert!(x.restrict_p_residual(&vec![0.0; r.len()]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_level_rejected() {
        let (h, _) = two_level();
        assert!(TransferOps::from_hierarchy(&h, 1).is_err());
    }
}
