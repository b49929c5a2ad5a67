//! Linear saddle-point solves `[A_α B; Bᵀ 0] (u, p) = (f, w)`.
//!
//! The default path eliminates the velocity blockwise and solves the SPD
//! pressure system `M p = Bᵀ A_α⁻¹ f − w` with `M = Bᵀ A_α⁻¹ B` by sparse
//! Cholesky. `M` has the constant vector in its kernel; one vertex is pinned
//! to zero and the solution is shifted to zero mean afterwards. A direct LU
//! of the full block system with the same pinned vertex is kept as an
//! independent reference, and a matrix-free Jacobi-preconditioned CG on the
//! Schur system is available for large meshes.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMat, SparseColMatRef, SymbolicSparseColMat, Triplet};
use faer::{MatMut, Side};

use crate::assembly::{AssembledOperators, DiscreteState};
use crate::error::{Error, Result};
use crate::linalg::{dot2, l2, scale2, sub2, Sym2, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearSolverKind {
    /// Sparse Cholesky of the pressure Schur complement.
    #[default]
    Schur,
    /// Sparse LU of the full saddle-point matrix.
    Direct,
    /// Jacobi-preconditioned CG on the Schur complement.
    Cg,
}

impl FromStr for LinearSolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "schur" | "s2" => Ok(Self::Schur),
            "direct" | "s1" => Ok(Self::Direct),
            "cg" => Ok(Self::Cg),
            other => Err(Error::InvalidArgument(format!("unknown linear solver `{other}`"))),
        }
    }
}

impl fmt::Display for LinearSolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Schur => "schur",
            Self::Direct => "direct",
            Self::Cg => "cg",
        })
    }
}

fn invert_blocks(blocks: &[Sym2]) -> Result<Vec<Sym2>> {
    blocks
        .iter()
        .enumerate()
        .map(|(t, b)| {
            if !(b.min_eigenvalue() > 0.0) {
                return Err(Error::Factorization(format!("velocity block {t} is not SPD: {b:?}")));
            }
            Ok(b.inverse().expect("SPD block is invertible"))
        })
        .collect()
}

fn apply_blocks(blocks: &[Sym2], v: &[Vec2]) -> Vec<Vec2> {
    blocks.iter().zip(v).map(|(b, &x)| b.apply(x)).collect()
}

/// Column-major lower-triangle sparsity of the P1 stencil plus, for each
/// triangle, the value slot of every local pair.
#[derive(Debug)]
pub struct SchurPattern {
    symbolic: SymbolicSparseColMat<usize>,
    slots: Vec<[[usize; 3]; 3]>,
    /// Off-diagonal slots of the pinned column.
    pinned_column: Vec<usize>,
    pinned_diag: usize,
    llt: SymbolicLlt<usize>,
}

/// Vertex whose pressure is fixed to zero before the mean shift.
pub const PINNED_VERTEX: usize = 0;

impl SchurPattern {
    pub fn new(triangles: &[[usize; 3]], num_vertices: usize) -> Result<Self> {
        let mut rows_of: Vec<Vec<usize>> = vec![Vec::new(); num_vertices];
        for tri in triangles {
            for &i in tri {
                for &j in tri {
                    if i >= j {
                        rows_of[j].push(i);
                    }
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(num_vertices + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for rows in &mut rows_of {
            rows.sort_unstable();
            rows.dedup();
            row_idx.extend_from_slice(rows);
            col_ptr.push(row_idx.len());
        }
        let slot = |i: usize, j: usize| {
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            let range = col_ptr[c]..col_ptr[c + 1];
            col_ptr[c] + row_idx[range].binary_search(&r).expect("entry is in the pattern")
        };
        let slots = triangles
            .iter()
            .map(|tri| {
                let mut s = [[0; 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        s[a][b] = slot(tri[a], tri[b]);
                    }
                }
                s
            })
            .collect();
        let pinned_diag = slot(PINNED_VERTEX, PINNED_VERTEX);
        let pinned_column = (col_ptr[PINNED_VERTEX]..col_ptr[PINNED_VERTEX + 1]).filter(|&s| s != pinned_diag).collect();
        let symbolic = SymbolicSparseColMat::new_checked(num_vertices, num_vertices, col_ptr, None, row_idx);
        let llt = SymbolicLlt::try_new(symbolic.as_ref(), Side::Lower).map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Self { symbolic, slots, pinned_column, pinned_diag, llt })
    }

    pub fn nnz(&self) -> usize {
        self.symbolic.row_idx().len()
    }

    /// Lower-triangle values of `Bᵀ diag(inv_blocks) B`, before pinning.
    fn values(&self, ops: &AssembledOperators, inv_blocks: &[Sym2]) -> Vec<f64> {
        let mut values = vec![0.0; self.nnz()];
        for (t, slots) in self.slots.iter().enumerate() {
            let a2 = ops.areas[t] * ops.areas[t];
            let g = &ops.gradients[t];
            let tri = &ops.triangles[t];
            for a in 0..3 {
                let ag = inv_blocks[t].apply(g[a]);
                for b in 0..3 {
                    if tri[a] >= tri[b] {
                        values[slots[a][b]] += a2 * dot2(g[b], ag);
                    }
                }
            }
        }
        values
    }
}

/// Factorized pressure Schur complement for one set of velocity blocks.
pub struct SchurOperator {
    pub inv_blocks: Vec<Sym2>,
    llt: Llt<usize, f64>,
    incompatible: AtomicUsize,
}

impl fmt::Debug for SchurOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SchurOperator").field("blocks", &self.inv_blocks.len()).finish_non_exhaustive()
    }
}

/// Entries `(i, j, M_ij)` of the unpinned Schur complement, both triangles.
pub fn schur_entries(ops: &AssembledOperators, blocks: &[Sym2]) -> Result<Vec<(usize, usize, f64)>> {
    let inv = invert_blocks(blocks)?;
    let mut out = Vec::with_capacity(9 * ops.num_triangles());
    for (t, tri) in ops.triangles.iter().enumerate() {
        let a2 = ops.areas[t] * ops.areas[t];
        let g = &ops.gradients[t];
        for a in 0..3 {
            for b in 0..3 {
                out.push((tri[a], tri[b], a2 * inv[t].quad_form(g[a], g[b])));
            }
        }
    }
    Ok(out)
}

impl SchurOperator {
    /// Assembles and factorizes `Bᵀ blocks⁻¹ B` on `pattern`.
    pub fn factorize(pattern: &SchurPattern, ops: &AssembledOperators, blocks: &[Sym2]) -> Result<Self> {
        let inv_blocks = invert_blocks(blocks)?;
        let mut values = pattern.values(ops, &inv_blocks);
        for &s in &pattern.pinned_column {
            values[s] = 0.0;
        }
        if !(values[pattern.pinned_diag] > 0.0) {
            values[pattern.pinned_diag] = 1.0;
        }
        let mat = SparseColMatRef::new(pattern.symbolic.as_ref(), &values);
        let llt = Llt::try_new_with_symbolic(pattern.llt.clone(), mat, Side::Lower)
            .map_err(|e| Error::Factorization(format!("Schur complement is not positive definite: {e:?}")))?;
        Ok(Self { inv_blocks, llt, incompatible: AtomicUsize::new(0) })
    }

    /// Number of right-hand sides whose constraint part had a constant component.
    pub fn incompatible_count(&self) -> usize {
        self.incompatible.load(Ordering::Relaxed)
    }

    pub fn solve(&self, ops: &AssembledOperators, rhs_u: &[Vec2], rhs_p: &[f64]) -> DiscreteState {
        let y = apply_blocks(&self.inv_blocks, rhs_u);
        let mut b: Vec<f64> = ops.apply_bt(&y).iter().zip(rhs_p).map(|(by, w)| by - w).collect();
        if project_out_constant(&mut b) {
            self.incompatible.fetch_add(1, Ordering::Relaxed);
        }
        b[PINNED_VERTEX] = 0.0;
        let n = b.len();
        self.llt.solve_in_place(MatMut::from_column_major_slice_mut(&mut b, n, 1));
        let mut p = b;
        let bp = ops.apply_b(&p);
        let u = self
            .inv_blocks
            .iter()
            .zip(rhs_u.iter().zip(&bp))
            .map(|(inv, (&f, &g))| inv.apply(sub2(f, g)))
            .collect();
        ops.project_zero_mean(&mut p);
        DiscreteState { u, p }
    }
}

/// Removes the mean of `b`; true when that mean was not negligible.
fn project_out_constant(b: &mut [f64]) -> bool {
    let n = b.len() as f64;
    let sum: f64 = b.iter().sum();
    let scale: f64 = b.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
    let mean = sum / n;
    b.iter_mut().for_each(|x| *x -= mean);
    sum.abs() > 1e-10 * scale
}

/// LU of the full saddle matrix with pressure vertex 0 pinned.
///
/// The constraint right-hand side is projected to zero sum and the pressure
/// shifted to zero mean afterwards, matching [`SchurOperator`].
pub struct DirectSaddle {
    lu: Lu<usize, f64>,
    num_velocity: usize,
    num_pressure: usize,
}

impl fmt::Debug for DirectSaddle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DirectSaddle").field("size", &(self.num_velocity + self.num_pressure)).finish()
    }
}

impl DirectSaddle {
    pub fn factorize(ops: &AssembledOperators, blocks: &[Sym2]) -> Result<Self> {
        let nu = 2 * ops.num_triangles();
        let np = ops.num_vertices;
        let n = nu + np;
        let mut trip = Vec::with_capacity(16 * ops.num_triangles() + 1);
        for (t, b) in blocks.iter().enumerate() {
            let r = 2 * t;
            trip.push(Triplet::new(r, r, b.xx));
            trip.push(Triplet::new(r, r + 1, b.xy));
            trip.push(Triplet::new(r + 1, r, b.xy));
            trip.push(Triplet::new(r + 1, r + 1, b.yy));
        }
        for (row, col, val) in ops.b_triplets() {
            if col != PINNED_VERTEX {
                trip.push(Triplet::new(row, nu + col, val));
                trip.push(Triplet::new(nu + col, row, val));
            }
        }
        trip.push(Triplet::new(nu + PINNED_VERTEX, nu + PINNED_VERTEX, 1.0));
        let mat = SparseColMat::try_new_from_triplets(n, n, &trip).map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let symbolic = SymbolicLu::try_new(mat.symbolic()).map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let lu = Lu::try_new_with_symbolic(symbolic, mat.as_ref())
            .map_err(|e| Error::Factorization(format!("saddle matrix is singular: {e:?}")))?;
        Ok(Self { lu, num_velocity: nu, num_pressure: np })
    }

    pub fn solve(&self, ops: &AssembledOperators, rhs_u: &[Vec2], rhs_p: &[f64]) -> DiscreteState {
        let n = self.num_velocity + self.num_pressure;
        let mut w = rhs_p.to_vec();
        project_out_constant(&mut w);
        w[PINNED_VERTEX] = 0.0;
        let mut x = Vec::with_capacity(n);
        x.extend(rhs_u.iter().flatten());
        x.extend_from_slice(&w);
        self.lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
        let u = x[..self.num_velocity].chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let mut p = x[self.num_velocity..].to_vec();
        ops.project_zero_mean(&mut p);
        DiscreteState { u, p }
    }
}

/// Matrix-free CG on the Schur complement.
#[derive(Debug)]
pub struct CgSchur {
    pub inv_blocks: Vec<Sym2>,
    diagonal: Vec<f64>,
    pub tol: f64,
}

impl CgSchur {
    pub fn new(ops: &AssembledOperators, blocks: &[Sym2]) -> Result<Self> {
        let inv_blocks = invert_blocks(blocks)?;
        let mut diagonal = vec![0.0; ops.num_vertices];
        for (t, tri) in ops.triangles.iter().enumerate() {
            let a2 = ops.areas[t] * ops.areas[t];
            for (local, &v) in tri.iter().enumerate() {
                let g = ops.gradients[t][local];
                diagonal[v] += a2 * inv_blocks[t].quad_form(g, g);
            }
        }
        Ok(Self { inv_blocks, diagonal, tol: 1e-13 })
    }

    fn apply(&self, ops: &AssembledOperators, p: &[f64]) -> Vec<f64> {
        ops.apply_bt(&apply_blocks(&self.inv_blocks, &ops.apply_b(p)))
    }

    pub fn solve(&self, ops: &AssembledOperators, rhs_u: &[Vec2], rhs_p: &[f64]) -> DiscreteState {
        let y = apply_blocks(&self.inv_blocks, rhs_u);
        let mut b: Vec<f64> = ops.apply_bt(&y).iter().zip(rhs_p).map(|(by, w)| by - w).collect();
        project_out_constant(&mut b);
        let n = b.len();
        let mut p = vec![0.0; n];
        let mut r = b.clone();
        let precondition = |r: &[f64]| -> Vec<f64> {
            let mut z: Vec<f64> = r.iter().zip(&self.diagonal).map(|(x, d)| x / d).collect();
            project_out_constant(&mut z);
            z
        };
        let mut z = precondition(&r);
        let mut d = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let target = self.tol * l2(&b);
        for _ in 0..(10 * n).max(100) {
            if l2(&r) <= target {
                break;
            }
            let md = self.apply(ops, &d);
            let step = rz / d.iter().zip(&md).map(|(a, b)| a * b).sum::<f64>();
            p.iter_mut().zip(&d).for_each(|(x, di)| *x += step * di);
            r.iter_mut().zip(&md).for_each(|(x, mi)| *x -= step * mi);
            z = precondition(&r);
            let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let ratio = rz_next / rz;
            rz = rz_next;
            d.iter_mut().zip(&z).for_each(|(di, zi)| *di = zi + ratio * *di);
        }
        let bp = ops.apply_b(&p);
        let u = self
            .inv_blocks
            .iter()
            .zip(rhs_u.iter().zip(&bp))
            .map(|(inv, (&f, &g))| inv.apply(sub2(f, g)))
            .collect();
        ops.project_zero_mean(&mut p);
        DiscreteState { u, p }
    }
}

#[derive(Debug)]
pub enum SaddleFactor {
    Schur(SchurOperator),
    Direct(DirectSaddle),
    Cg(CgSchur),
}

impl SaddleFactor {
    pub fn solve(&self, ops: &AssembledOperators, rhs_u: &[Vec2], rhs_p: &[f64]) -> DiscreteState {
        match self {
            Self::Schur(s) => s.solve(ops, rhs_u, rhs_p),
            Self::Direct(d) => d.solve(ops, rhs_u, rhs_p),
            Self::Cg(c) => c.solve(ops, rhs_u, rhs_p),
        }
    }

    /// Blockwise inverse of the velocity operator, where the path keeps one.
    pub fn inv_blocks(&self) -> Option<&[Sym2]> {
        match self {
            Self::Schur(s) => Some(&s.inv_blocks),
            Self::Direct(_) => None,
            Self::Cg(c) => Some(&c.inv_blocks),
        }
    }
}

/// Per-level factorization cache keyed by the splitting parameter.
///
/// The symbolic Cholesky analysis is shared by every factorization on the
/// level, including the frozen-coefficient systems of the correction
/// projection, which are not cached.
pub struct SaddleCache {
    kind: LinearSolverKind,
    pattern: OnceLock<Result<SchurPattern, String>>,
    factors: Mutex<HashMap<u64, Arc<SaddleFactor>>>,
    factorizations: AtomicUsize,
}

impl fmt::Debug for SaddleCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SaddleCache")
            .field("kind", &self.kind)
            .field("factorizations", &self.factorization_count())
            .finish_non_exhaustive()
    }
}

impl SaddleCache {
    pub fn new(kind: LinearSolverKind) -> Self {
        Self { kind, pattern: OnceLock::new(), factors: Mutex::new(HashMap::new()), factorizations: AtomicUsize::new(0) }
    }

    pub fn kind(&self) -> LinearSolverKind {
        self.kind
    }

    pub fn factorization_count(&self) -> usize {
        self.factorizations.load(Ordering::Relaxed)
    }

    pub fn incompatible_count(&self) -> usize {
        let factors = self.factors.lock().expect("cache lock poisoned");
        factors
            .values()
            .map(|f| match f.as_ref() {
                SaddleFactor::Schur(s) => s.incompatible_count(),
                _ => 0,
            })
            .sum()
    }

    fn pattern(&self, ops: &AssembledOperators) -> Result<&SchurPattern> {
        self.pattern
            .get_or_init(|| SchurPattern::new(&ops.triangles, ops.num_vertices).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::Factorization(e.clone()))
    }

    /// Factorization for `A + (1/α)|T| I`, built at most once per α.
    pub fn for_alpha(&self, ops: &AssembledOperators, alpha: f64) -> Result<Arc<SaddleFactor>> {
        let key = alpha.to_bits();
        if let Some(f) = self.factors.lock().expect("cache lock poisoned").get(&key) {
            return Ok(Arc::clone(f));
        }
        let factor = Arc::new(self.factorize(ops, &ops.a_alpha_blocks_for(alpha))?);
        self.factors.lock().expect("cache lock poisoned").insert(key, Arc::clone(&factor));
        Ok(factor)
    }

    /// Uncached factorization for arbitrary SPD velocity blocks.
    pub fn factorize(&self, ops: &AssembledOperators, blocks: &[Sym2]) -> Result<SaddleFactor> {
        self.factorizations.fetch_add(1, Ordering::Relaxed);
        Ok(match self.kind {
            LinearSolverKind::Schur => SaddleFactor::Schur(SchurOperator::factorize(self.pattern(ops)?, ops, blocks)?),
            LinearSolverKind::Direct => SaddleFactor::Direct(DirectSaddle::factorize(ops, blocks)?),
            LinearSolverKind::Cg => SaddleFactor::Cg(CgSchur::new(ops, blocks)?),
        })
    }
}

/// Schur complement of `A_α` as assembled in `ops`.
pub fn build_schur(ops: &AssembledOperators) -> Result<SchurOperator> {
    let pattern = SchurPattern::new(&ops.triangles, ops.num_vertices)?;
    SchurOperator::factorize(&pattern, ops, &ops.a_alpha_blocks)
}

pub fn solve_saddle(schur: &SchurOperator, ops: &AssembledOperators, rhs_u: &[Vec2], rhs_p: &[f64]) -> DiscreteState {
    schur.solve(ops, rhs_u, rhs_p)
}

/// Reference solve of the `A_α` system by one LU of the full block matrix.
pub fn solve_saddle_direct(ops: &AssembledOperators, rhs_u: &[Vec2], rhs_p: &[f64]) -> Result<DiscreteState> {
    Ok(DirectSaddle::factorize(ops, &ops.a_alpha_blocks)?.solve(ops, rhs_u, rhs_p))
}

/// `A_α u + B p − rhs_u` blockwise; used to check solutions.
pub fn momentum_mismatch(ops: &AssembledOperators, blocks: &[Sym2], state: &DiscreteState, rhs_u: &[Vec2]) -> Vec<Vec2> {
    let bp = ops.apply_b(&state.p);
    blocks
        .iter()
        .zip(state.u.iter().zip(bp.iter().zip(rhs_u)))
        .map(|(b, (&u, (&g, &f)))| sub2(b.apply(u), sub2(f, g)))
        .collect()
}

/// `(1/α)|T| v` per triangle.
pub fn scaled_mass(ops: &AssembledOperators, v: &[Vec2], alpha: f64) -> Vec<Vec2> {
    v.iter().zip(&ops.areas).map(|(&x, &a)| scale2(a / alpha, x)).collect()
}
