//! Compressed sparse row matrices and the factorizations built on faer.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, CholeskySymbolicParams, LdltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Col, Side};
use serde::Serialize;

/// Row-compressed real matrix. Duplicate triplets are summed, exact zeros dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum LinalgError {
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("solution is not finite")]
    NotFinite,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: vec![], values: vec![] }
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds {nrows}x{ncols}");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0f64; triplets.len()];
        for &(r, c, v) in triplets {
            cols[fill[r]] = c;
            vals[fill[r]] = v;
            fill[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            scratch.clear();
            scratch.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            // stable sort keeps summation order deterministic
            scratch.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < scratch.len() {
                let c = scratch[k].0;
                let mut acc = 0.0;
                while k < scratch.len() && scratch[k].0 == c {
                    acc += scratch[k].1;
                    k += 1;
                }
                if acc != 0.0 {
                    col_idx.push(c);
                    values.push(acc);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), d.len(), &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            out.extend(self.row(r).map(|(c, v)| (r, c, v)));
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn transpose_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                out[c] += v * y[r];
            }
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        SparseMatrix::from_triplets(self.ncols, self.nrows, &t)
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut pattern: Vec<usize> = Vec::new();
        let mut t = Vec::new();
        for r in 0..self.nrows {
            pattern.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        pattern.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            pattern.sort_unstable();
            for &c in &pattern {
                t.push((r, c, acc[c]));
            }
        }
        SparseMatrix::from_triplets(self.nrows, other.ncols, &t)
    }

    /// `selfᵀ · diag(w) · self`.
    pub fn gram(&self, w: &[f64]) -> SparseMatrix {
        assert_eq!(w.len(), self.nrows);
        self.transpose().matmul(&self.scale_rows(w))
    }

    pub fn scale_rows(&self, w: &[f64]) -> SparseMatrix {
        let mut out = self.clone();
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.values[k] *= w[r];
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = self.triplets();
        t.extend(other.triplets());
        SparseMatrix::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn select_rows(&self, rows: &[usize]) -> SparseMatrix {
        let mut t = Vec::new();
        for (i, &r) in rows.iter().enumerate() {
            t.extend(self.row(r).map(|(c, v)| (i, c, v)));
        }
        SparseMatrix::from_triplets(rows.len(), self.ncols, &t)
    }

    pub fn vstack(blocks: &[&SparseMatrix]) -> SparseMatrix {
        let ncols = blocks.first().map_or(0, |b| b.ncols);
        let mut t = Vec::new();
        let mut off = 0;
        for b in blocks {
            assert_eq!(b.ncols, ncols);
            t.extend(b.triplets().into_iter().map(|(r, c, v)| (r + off, c, v)));
            off += b.nrows;
        }
        SparseMatrix::from_triplets(off, ncols, &t)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            d[r][c] = v;
        }
        d
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let t = self.transpose();
        self.nrows == self.ncols
            && self.add(&t.scale(-1.0)).values.iter().all(|v| v.abs() <= tol)
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>, LinalgError> {
        let t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .map_err(|e| LinalgError::Factorization(format!("{e:?}")))
    }

    /// Coordinate triplet text: a `rows cols nnz` header then one `row col value` line per entry.
    pub fn to_triplet_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.nrows, self.ncols, self.nnz());
        for (r, c, v) in self.triplets() {
            s.push_str(&format!("{r} {c} {v:e}\n"));
        }
        s
    }
}

#[derive(Serialize)]
pub struct TripletDump {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl From<&SparseMatrix> for TripletDump {
    fn from(m: &SparseMatrix) -> Self {
        TripletDump { rows: m.nrows, cols: m.ncols, entries: m.triplets() }
    }
}

fn to_vec(c: &Col<f64>) -> Vec<f64> {
    (0..c.nrows()).map(|i| c[i]).collect()
}

fn check_finite(x: Vec<f64>) -> Result<Vec<f64>, LinalgError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(LinalgError::NotFinite)
    }
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct SpdSolver {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
}

impl SpdSolver {
    pub fn new(a: &SparseMatrix) -> Result<Self, LinalgError> {
        let m = a.to_faer()?;
        let llt = m.sp_cholesky(Side::Lower).map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
        Ok(SpdSolver { llt, n: a.nrows })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        assert_eq!(b.len(), self.n);
        let rhs = Col::<f64>::from_fn(self.n, |i| b[i]);
        check_finite(to_vec(&self.llt.solve(&rhs)))
    }
}

/// Sparse LU factorization with refinement, for general square systems.
pub struct LuSolver {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    a: SparseMatrix,
}

impl LuSolver {
    pub fn new(a: &SparseMatrix) -> Result<Self, LinalgError> {
        let m = a.to_faer()?;
        let lu = m.sp_lu().map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
        Ok(LuSolver { lu, a: a.clone() })
    }

    /// Solves with a few steps of iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = b.len();
        let rhs = Col::<f64>::from_fn(n, |i| b[i]);
        let mut x = to_vec(&self.lu.solve(&rhs));
        let bnorm = inf_norm(b).max(1e-300);
        for _ in 0..3 {
            let ax = self.a.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            if inf_norm(&r) <= 1e-15 * bnorm {
                break;
            }
            let dx = self.lu.solve(&Col::<f64>::from_fn(n, |i| r[i]));
            for i in 0..n {
                x[i] += dx[i];
            }
        }
        check_finite(x)
    }
}

/// Symmetric LDLᵀ of the regularized saddle matrix `[G Cᵀ; C −εI]` (quasi-definite for
/// positive definite G), refined against the exact system `[G Cᵀ; C 0]`.
pub struct KktSolver {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    exact: SparseMatrix,
    n: usize,
    nprimal: usize,
}

impl KktSolver {
    pub fn new(g: &SparseMatrix, c: &SparseMatrix, eps: f64) -> Result<Self, LinalgError> {
        let n = g.nrows() + c.nrows();
        let exact = saddle_matrix(g, c, 0.0);
        let reg = saddle_matrix(g, c, eps);
        let lower: Vec<_> = reg.triplets().into_iter().filter(|&(r, col, _)| r >= col).map(|(r, col, v)| Triplet::new(r, col, v)).collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &lower).map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
        let fail = |e: &dyn std::fmt::Debug| LinalgError::Factorization(format!("{e:?}"));
        let symbolic = factorize_symbolic_cholesky(a.symbolic(), Side::Lower, SymmetricOrdering::Amd, CholeskySymbolicParams::default())
            .map_err(|e| fail(&e))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let signs: Vec<i8> = (0..n).map(|i| if i < g.nrows() { 1 } else { -1 }).collect();
        let par = faer::get_global_parallelism();
        let mut mem = MemBuffer::new(symbolic.factorize_numeric_ldlt_scratch::<f64>(par, Default::default()));
        let regularization = LdltRegularization {
            dynamic_regularization_signs: Some(&signs),
            dynamic_regularization_delta: eps.max(1e-300),
            dynamic_regularization_epsilon: 1e-3 * eps,
        };
        symbolic
            .factorize_numeric_ldlt(&mut values, a.as_ref(), Side::Lower, regularization, par, MemStack::new(&mut mem), Default::default())
            .map_err(|e| fail(&e))?;
        Ok(KktSolver { symbolic, values, exact, n, nprimal: g.nrows() })
    }

    fn solve_reg(&self, b: &[f64]) -> Vec<f64> {
        let par = faer::get_global_parallelism();
        let mut x = faer::Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, par));
        LdltRef::new(&self.symbolic, &self.values).solve_in_place_with_conj(faer::Conj::No, x.as_mut(), par, MemStack::new(&mut mem));
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    /// Solves the exact saddle system by refinement. Both blocks are driven to their
    /// own roundoff floor since the constraint rows are usually much smaller than the
    /// stationarity rows.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let np = self.nprimal;
        let scale_p = 1.0 + inf_norm(&b[..np]);
        let scale_c = 1.0 + inf_norm(&b[np..]);
        let measure = |x: &[f64]| {
            let ax = self.exact.mul_vec(x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let size = (inf_norm(&r[..np]) / scale_p).max(inf_norm(&r[np..]) / scale_c);
            (r, size)
        };
        let mut x = self.solve_reg(b);
        let (mut r, mut size) = measure(&x);
        let mut best = (x.clone(), size);
        let mut stalled = 0;
        for _ in 0..60 {
            if size <= 1e-15 || stalled >= 3 {
                break;
            }
            let dx = self.solve_reg(&r);
            for i in 0..self.n {
                x[i] += dx[i];
            }
            (r, size) = measure(&x);
            if size < 0.5 * best.1 {
                stalled = 0;
            } else {
                stalled += 1;
            }
            if size < best.1 {
                best = (x.clone(), size);
            }
        }
        check_finite(best.0)
    }
}

pub fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

/// Assembles the symmetric saddle matrix `[G Cᵀ; C -δI]`.
pub fn saddle_matrix(g: &SparseMatrix, c: &SparseMatrix, delta: f64) -> SparseMatrix {
    let n = g.nrows();
    let m = c.nrows();
    let mut t = g.triplets();
    for (r, col, v) in c.triplets() {
        t.push((n + r, col, v));
        t.push((col, n + r, v));
    }
    if delta != 0.0 {
        t.extend((0..m).map(|i| (n + i, n + i, -delta)));
    }
    SparseMatrix::from_triplets(n + m, n + m, &t)
}

/// Minimizes `½xᵀGx − gᵀx` subject to `Cx = d` via the KKT system; returns `(x, multipliers)`.
pub fn solve_equality_qp(
    g: &SparseMatrix,
    lin: &[f64],
    c: &SparseMatrix,
    d: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
    let n = g.nrows();
    let mut rhs = lin.to_vec();
    rhs.extend_from_slice(d);
    let sol = KktSolver::new(g, c, 1e-8)?.solve(&rhs)?;
    Ok((sol[..n].to_vec(), sol[n..].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = SparseMatrix::from_triplets(2, 3, &[(0, 1, 1.0), (0, 1, 2.0), (1, 2, 1.0), (1, 2, -1.0), (1, 0, 4.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 2), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![3.0, 4.0]);
        assert_eq!(m.transpose_mul_vec(&[1.0, 2.0]), vec![8.0, 3.0, 0.0]);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0)]);
        let b = SparseMatrix::from_triplets(2, 2, &[(0, 0, 4.0), (1, 0, 5.0), (1, 1, 6.0)]);
        assert_eq!(a.matmul(&b).to_dense(), vec![vec![14.0, 12.0], vec![15.0, 18.0]]);
        assert!(a.gram(&[1.0, 1.0]).is_symmetric(0.0));
    }

    #[test]
    fn equality_qp_on_plane() {
        // min ½|x|² s.t. x0 + x1 = 2  ->  (1, 1)
        let g = SparseMatrix::identity(2);
        let c = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, 1.0)]);
        let (x, _) = solve_equality_qp(&g, &[0.0, 0.0], &c, &[2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        let s = SpdSolver::new(&SparseMatrix::diagonal(&[2.0, 4.0])).unwrap();
        let y = s.solve(&[2.0, 2.0]).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-15 && (y[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kkt_matches_lu() {
        // path-graph Laplacian plus shift, two constraints
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.extend([(i, i, 1.0), (i + 1, i + 1, 1.0), (i, i + 1, -1.0), (i + 1, i, -1.0)]);
        }
        t.extend((0..n).map(|i| (i, i, 1e-6)));
        let g = SparseMatrix::from_triplets(n, n, &t);
        let c = SparseMatrix::from_triplets(2, n, &[(0, 0, 1.0), (0, 5, 1.0), (1, 20, 1.0), (1, 29, -1.0)]);
        let mut rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        rhs.extend([1.0, -2.0]);
        let lu = LuSolver::new(&saddle_matrix(&g, &c, 0.0)).unwrap().solve(&rhs).unwrap();
        let kkt = KktSolver::new(&g, &c, 1e-10).unwrap().solve(&rhs).unwrap();
        for (a, b) in lu.iter().zip(&kkt) {
            assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "{a} {b}");
        }
    }

    #[test]
    fn kkt_large_grid() {
        let w = 60;
        let n = w * w;
        let mut t = Vec::new();
        for y in 0..w {
            for x in 0..w {
                let i = y * w + x;
                for j in [if x + 1 < w { Some(i + 1) } else { None }, if y + 1 < w { Some(i + w) } else { None }].into_iter().flatten() {
                    t.extend([(i, i, 1.0), (j, j, 1.0), (i, j, -1.0), (j, i, -1.0)]);
                }
                t.push((i, i, 1e-6));
            }
        }
        let g = SparseMatrix::from_triplets(n, n, &t);
        let ct: Vec<_> = (0..w).flat_map(|r| [(r, r * w, 1.0), (r, r * w + w - 1, -1.0)]).collect();
        let c = SparseMatrix::from_triplets(w, n, &ct);
        let mut rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        rhs.extend((0..w).map(|i| i as f64));
        let lu = LuSolver::new(&saddle_matrix(&g, &c, 0.0)).unwrap().solve(&rhs).unwrap();
        let kkt = KktSolver::new(&g, &c, 1e-10).unwrap().solve(&rhs).unwrap();
        let err = lu.iter().zip(&kkt).map(|(a, b)| (a - b).abs() / (1.0 + a.abs())).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }
}
