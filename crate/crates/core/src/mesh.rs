//! Nested uniform triangulations of a rectangle.
//!
//! The base mesh splits every grid square along the lower-left to upper-right
//! diagonal. Finer levels come from regular (red) refinement: the three edge
//! midpoints of each triangle are joined, giving four similar children.
//! Coarse vertices keep their index on the fine level and edge midpoints are
//! appended after them.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::Vec2;

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    /// The square (-1, 1)².
    pub const fn reference_square() -> Self {
        Self::new(-1.0, 1.0, -1.0, 1.0)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    fn tolerance(&self) -> f64 {
        1e-12 * (self.x1 - self.x0).max(self.y1 - self.y0)
    }

    /// Side of the boundary an edge lies on, decided by the edge midpoint so
    /// that edges touching a corner are attributed to the side they run along.
    pub fn side_of_edge(&self, a: Vec2, b: Vec2) -> Result<Side> {
        let tol = self.tolerance();
        let on = |s: f64, t: f64, c: f64| (s - c).abs() <= tol && (t - c).abs() <= tol;
        let side = if on(a[0], b[0], self.x1) {
            Side::XPlus
        } else if on(a[0], b[0], self.x0) {
            Side::XMinus
        } else if on(a[1], b[1], self.y1) {
            Side::YPlus
        } else if on(a[1], b[1], self.y0) {
            Side::YMinus
        } else {
            return Err(Error::InvalidArgument(format!(
                "edge {a:?}-{b:?} does not lie on the boundary"
            )));
        };
        Ok(side)
    }
}

/// Boundary side tag of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    XPlus,
    XMinus,
    YPlus,
    YMinus,
}

impl Side {
    pub fn outward_normal(self) -> Vec2 {
        match self {
            Side::XPlus => [1.0, 0.0],
            Side::XMinus => [-1.0, 0.0],
            Side::YPlus => [0.0, 1.0],
            Side::YMinus => [0.0, -1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    /// Endpoints in the counterclockwise order of the owning triangle.
    pub vertices: [usize; 2],
    pub normal: Vec2,
    pub side: Side,
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct MeshLevel {
    pub domain: Rect,
    pub vertices: Vec<Vec2>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// 1 for the coarsest level.
    pub level_index: usize,
    /// Grid spacing along each axis; halves with every refinement.
    pub h: f64,
}

impl MeshLevel {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Velocity plus pressure unknowns: two per triangle, one per vertex.
    pub fn dofs(&self) -> usize {
        2 * self.num_triangles() + self.num_vertices()
    }

    pub fn corners(&self, t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        signed_area(&self.corners(t))
    }

    pub fn centroid(&self, t: usize) -> Vec2 {
        let [a, b, c] = self.corners(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn longest_edge(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(i, j)| {
                let (p, q) = (self.vertices[i], self.vertices[j]);
                (p[0] - q[0]).hypot(p[1] - q[1])
            })
            .fold(0.0, f64::max)
    }

    /// Checks orientation, exact tiling of the domain and edge manifoldness.
    pub fn validate(&self) -> Result<()> {
        let mut total = 0.0;
        for t in 0..self.num_triangles() {
            let area = self.signed_area(t);
            if area <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "triangle {t} has non-positive signed area {area}"
                )));
            }
            total += area;
        }
        let domain_area = self.domain.area();
        if (total - domain_area).abs() > 1e-12 * domain_area {
            return Err(Error::InvalidArgument(format!(
                "triangles cover area {total}, domain has {domain_area}"
            )));
        }
        for (edge, owners) in edge_owners(&self.triangles) {
            if owners.len() > 2 {
                return Err(Error::InvalidArgument(format!(
                    "edge {edge:?} shared by {} triangles",
                    owners.len()
                )));
            }
            if owners.len() == 1 {
                let (a, b) = (self.vertices[edge.0], self.vertices[edge.1]);
                self.domain.side_of_edge(a, b)?;
            }
        }
        Ok(())
    }

    /// Plain-text dump: vertex count, `x y` lines, triangle count, `i j k` lines (0-based).
    pub fn write_node_element<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.num_vertices())?;
        for v in &self.vertices {
            writeln!(out, "{} {}", v[0], v[1])?;
        }
        writeln!(out, "{}", self.num_triangles())?;
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

pub fn signed_area(tri: &[Vec2; 3]) -> f64 {
    let [a, b, c] = tri;
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn sorted(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// For every undirected edge, the (triangle, local edge) pairs that contain it.
fn edge_owners(triangles: &[[usize; 3]]) -> BTreeMap<(usize, usize), Vec<(usize, usize)>> {
    let mut owners: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for local in 0..3 {
            let (a, b) = (tri[local], tri[(local + 1) % 3]);
            owners.entry(sorted(a, b)).or_default().push((t, local));
        }
    }
    owners
}

fn find_boundary_edges(vertices: &[Vec2], triangles: &[[usize; 3]], domain: &Rect) -> Result<Vec<BoundaryEdge>> {
    let mut edges = Vec::new();
    for (_, owners) in edge_owners(triangles) {
        if let [(t, local)] = owners[..] {
            let (a, b) = (triangles[t][local], triangles[t][(local + 1) % 3]);
            let (pa, pb) = (vertices[a], vertices[b]);
            let side = domain.side_of_edge(pa, pb)?;
            edges.push(BoundaryEdge {
                vertices: [a, b],
                normal: side.outward_normal(),
                side,
                length: (pb[0] - pa[0]).hypot(pb[1] - pa[1]),
            });
        }
    }
    Ok(edges)
}

/// Uniform `n × n` grid of squares, each cut into two right triangles.
pub fn build_uniform_square_mesh(domain: Rect, n: usize) -> Result<MeshLevel> {
    if n == 0 {
        return Err(Error::InvalidArgument("subdivisions per side must be at least 1".into()));
    }
    if !(domain.x1 > domain.x0 && domain.y1 > domain.y0) {
        return Err(Error::InvalidArgument(format!("degenerate domain {domain:?}")));
    }
    let stride = n + 1;
    let dx = (domain.x1 - domain.x0) / n as f64;
    let dy = (domain.y1 - domain.y0) / n as f64;
    let mut vertices = Vec::with_capacity(stride * stride);
    for j in 0..stride {
        for i in 0..stride {
            vertices.push([domain.x0 + i as f64 * dx, domain.y0 + j as f64 * dy]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = j * stride + i;
            let v10 = v00 + 1;
            let v01 = v00 + stride;
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let boundary_edges = find_boundary_edges(&vertices, &triangles, &domain)?;
    Ok(MeshLevel {
        domain,
        vertices,
        triangles,
        boundary_edges,
        level_index: 1,
        h: dx.max(dy),
    })
}

/// Output of one regular refinement step.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub fine: MeshLevel,
    /// Coarse triangle → its four children (three corner children, then the middle one).
    pub child_map: Vec<[usize; 4]>,
    /// Coarse vertex → fine vertex.
    pub vertex_embedding: Vec<usize>,
    /// Sorted coarse edge → fine midpoint vertex.
    pub edge_midpoint_map: BTreeMap<(usize, usize), usize>,
}

pub fn refine_regular(coarse: &MeshLevel) -> Result<Refinement> {
    let nv = coarse.num_vertices();
    let mut vertices = coarse.vertices.clone();
    let vertex_embedding: Vec<usize> = (0..nv).collect();
    let mut midpoint_of: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edge_midpoint_map = BTreeMap::new();
    let mut triangles = Vec::with_capacity(4 * coarse.num_triangles());
    let mut child_map = Vec::with_capacity(coarse.num_triangles());

    for tri in &coarse.triangles {
        if tri.iter().any(|&v| v >= nv) {
            return Err(Error::InvalidArgument(format!("triangle {tri:?} references a missing vertex")));
        }
        let mut mid = |a: usize, b: usize| {
            let key = sorted(a, b);
            *midpoint_of.entry(key).or_insert_with(|| {
                let (pa, pb) = (coarse.vertices[a], coarse.vertices[b]);
                vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                let idx = vertices.len() - 1;
                edge_midpoint_map.insert(key, idx);
                idx
            })
        };
        let [a, b, c] = *tri;
        let ab = mid(a, b);
        let bc = mid(b, c);
        let ca = mid(c, a);
        let first = triangles.len();
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
        child_map.push([first, first + 1, first + 2, first + 3]);
    }

    let boundary_edges = find_boundary_edges(&vertices, &triangles, &coarse.domain)?;
    let fine = MeshLevel {
        domain: coarse.domain,
        vertices,
        triangles,
        boundary_edges,
        level_index: coarse.level_index + 1,
        h: 0.5 * coarse.h,
    };
    Ok(Refinement { fine, child_map, vertex_embedding, edge_midpoint_map })
}

/// Nested meshes, coarsest first, with the maps linking consecutive levels.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    pub levels: Vec<MeshLevel>,
    /// `child_maps[k]` maps triangles of level `k` to their children on level `k + 1`.
    pub child_maps: Vec<Vec<[usize; 4]>>,
    pub vertex_embeddings: Vec<Vec<usize>>,
    pub edge_midpoint_maps: Vec<BTreeMap<(usize, usize), usize>>,
}

impl MeshHierarchy {
    /// `num_levels` levels starting from a uniform mesh with `n0` cells per side.
    pub fn uniform(domain: Rect, n0: usize, num_levels: usize) -> Result<Self> {
        if num_levels == 0 {
            return Err(Error::InvalidArgument("a hierarchy needs at least one level".into()));
        }
        let mut hierarchy = Self {
            levels: vec![build_uniform_square_mesh(domain, n0)?],
            child_maps: Vec::new(),
            vertex_embeddings: Vec::new(),
            edge_midpoint_maps: Vec::new(),
        };
        for _ in 1..num_levels {
            let refinement = refine_regular(hierarchy.finest())?;
            hierarchy.levels.push(refinement.fine);
            hierarchy.child_maps.push(refinement.child_map);
            hierarchy.vertex_embeddings.push(refinement.vertex_embedding);
            hierarchy.edge_midpoint_maps.push(refinement.edge_midpoint_map);
        }
        Ok(hierarchy)
    }

    pub fn finest(&self) -> &MeshLevel {
        self.levels.last().expect("hierarchy is never empty")
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n: usize) -> MeshLevel {
        build_uniform_square_mesh(Rect::reference_square(), n).unwrap()
    }

    #[test]
    fn smallest_tiling() {
        let m = square(1);
        assert_eq!((m.num_triangles(), m.num_vertices()), (2, 4));
        assert_eq!(m.boundary_edges.len(), 4);
        m.validate().unwrap();
    }

    #[test]
    fn counts_for_sixteen_cells() {
        let m = square(16);
        assert_eq!(m.num_triangles(), 512);
        assert_eq!(m.num_vertices(), 289);
        assert_eq!(m.h, 0.125);
    }

    #[test]
    fn zero_subdivisions_rejected() {
        assert!(matches!(
            build_uniform_square_mesh(Rect::reference_square(), 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn one_red_step() {
        let r = refine_regular(&square(1)).unwrap();
        assert_eq!(r.fine.num_triangles(), 8);
        assert_eq!(r.fine.num_vertices(), 9);
        assert_eq!(r.fine.h, 1.0);
        r.fine.validate().unwrap();
        for (t, children) in r.child_map.iter().enumerate() {
            let parent = square(1).signed_area(t);
            for &c in children {
                assert_eq!(r.fine.signed_area(c), parent / 4.0);
            }
        }
    }

    #[test]
    fn refinement_matches_uniform_grid_geometry() {
        // regular refinement of the diagonal mesh reproduces the uniform 2n mesh
        let refined = refine_regular(&square(4)).unwrap().fine;
        let direct = square(8);
        let key = |m: &MeshLevel, t: usize| {
            let mut c = m.corners(t).map(|p| ((p[0] * 64.0).round() as i64, (p[1] * 64.0).round() as i64));
            c.sort();
            c
        };
        let mut a: Vec<_> = (0..refined.num_triangles()).map(|t| key(&refined, t)).collect();
        let mut b: Vec<_> = (0..direct.num_triangles()).map(|t| key(&direct, t)).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn sides_of_edges() {
        let d = Rect::reference_square();
        assert_eq!(d.side_of_edge([1.0, 0.0], [1.0, 0.5]).unwrap(), Side::XPlus);
        assert_eq!(d.side_of_edge([0.0, -1.0], [0.5, -1.0]).unwrap(), Side::YMinus);
        assert_eq!(d.side_of_edge([1.0, 0.75], [1.0, 1.0]).unwrap(), Side::XPlus);
        assert_eq!(d.side_of_edge([0.75, 1.0], [1.0, 1.0]).unwrap(), Side::YPlus);
        assert!(matches!(d.side_of_edge([0.0, 0.0], [1.0, 1.0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn boundary_normals_point_outward() {
        let m = square(3);
        for e in &m.boundary_edges {
            let [a, b] = e.vertices.map(|v| m.vertices[v]);
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            assert!(mid[0] * e.normal[0] + mid[1] * e.normal[1] > 0.0);
            // counterclockwise traversal: the normal is the tangent rotated clockwise
            let t = [b[0] - a[0], b[1] - a[1]];
            assert!((t[1] / e.length - e.normal[0]).abs() < 1e-14);
            assert!((-t[0] / e.length - e.normal[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn node_element_dump() {
        let mut buf = Vec::new();
        square(1).write_node_element(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "4\n-1 -1\n1 -1\n-1 1\n1 1\n2\n0 1 3\n0 3 2\n");
    }
}
