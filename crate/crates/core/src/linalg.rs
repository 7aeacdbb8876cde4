//! Small linear-algebra layer on top of `faer`.
//!
//! Dense matrices are `faer::Mat<c64>`. Sparse operators use the row-compressed
//! [`SparseMatrix`] defined here, which carries the kernels the Lindblad
//! right-hand side needs (left/right products against a column-major density
//! matrix) and converts to `faer` column-compressed storage for sparse LU.

use faer::sparse::{SparseColMat, Triplet};
use faer::prelude::Solve;
use faer::{Mat, Side};
use num_complex::Complex64 as c64;

use crate::error::{Error, Result};

pub(crate) const ZERO: c64 = c64::new(0.0, 0.0);
pub(crate) const ONE: c64 = c64::new(1.0, 0.0);
pub(crate) const I: c64 = c64::new(0.0, 1.0);

/// Row-compressed complex sparse matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<c64>,
}

impl SparseMatrix {
    /// Assemble from `(row, col, value)` triplets. Duplicates are summed and
    /// entries that end up exactly zero are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, c64)>,
    ) -> Self {
        let mut t: Vec<(usize, usize, c64)> = triplets.into_iter().collect();
        t.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<c64> = Vec::with_capacity(t.len());
        let mut rows: Vec<usize> = Vec::with_capacity(t.len());
        for (i, j, v) in t {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            if let (Some(&li), Some(&lj)) = (rows.last(), col_idx.last()) {
                if li == i && lj == j {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(i);
            col_idx.push(j);
            values.push(v);
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((i, j), v) in rows.into_iter().zip(col_idx).zip(values) {
            if v != ZERO {
                keep_rows.push(i);
                keep_cols.push(j);
                keep_vals.push(v);
            }
        }
        for &i in &keep_rows {
            row_ptr[i + 1] += 1;
        }
        for k in 0..nrows {
            row_ptr[k + 1] += row_ptr[k];
        }
        SparseMatrix { nrows, ncols, row_ptr, col_idx: keep_cols, values: keep_vals }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_triplets(nrows, ncols, std::iter::empty())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|k| (k, k, ONE)))
    }

    pub fn from_diagonal(diag: &[c64]) -> Self {
        let n = diag.len();
        Self::from_triplets(n, n, diag.iter().enumerate().map(|(k, &v)| (k, k, v)))
    }

    /// Sparse copy of a dense matrix, keeping entries with modulus above `drop_tol`.
    pub fn from_dense(m: &Mat<c64>, drop_tol: f64) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v.norm() > drop_tol {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
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

    /// Iterate over stored `(row, col, value)` entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, c64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, c64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.row(i).find(|&(c, _)| c == j).map(|(_, v)| v).unwrap_or(ZERO)
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(i, j, v)| (j, i, v.conj())))
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(i, j, v)| (j, i, v)))
    }

    pub fn conj(&self) -> Self {
        Self::from_triplets(self.nrows, self.ncols, self.triplets().map(|(i, j, v)| (i, j, v.conj())))
    }

    pub fn scale(&self, s: c64) -> Self {
        Self::from_triplets(self.nrows, self.ncols, self.triplets().map(|(i, j, v)| (i, j, s * v)))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Self::from_triplets(self.nrows, self.ncols, self.triplets().chain(other.triplets()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-ONE))
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut t = Vec::new();
        let mut acc = vec![ZERO; other.ncols];
        let mut seen = vec![false; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !seen[j] {
                        seen[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            for &j in &touched {
                t.push((i, j, acc[j]));
                acc[j] = ZERO;
                seen[j] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, t)
    }

    /// Kronecker product `a ⊗ b`.
    pub fn kron(a: &Self, b: &Self) -> Self {
        let mut t = Vec::with_capacity(a.nnz() * b.nnz());
        for (ia, ja, va) in a.triplets() {
            for (ib, jb, vb) in b.triplets() {
                t.push((ia * b.nrows + ib, ja * b.ncols + jb, va * vb));
            }
        }
        Self::from_triplets(a.nrows * b.nrows, a.ncols * b.ncols, t)
    }

    pub fn mul_vec(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `out += coef * self * X` for a column-major `n × n` matrix `X`.
    pub fn left_mul_acc(&self, x: &[c64], out: &mut [c64], coef: c64) {
        let n = self.ncols;
        let m = self.nrows;
        assert_eq!(x.len(), n * n);
        assert_eq!(out.len(), m * n);
        let vals: Vec<c64> = self.values.iter().map(|v| coef * v).collect();
        for (xc, oc) in x.chunks_exact(n).zip(out.chunks_exact_mut(m)) {
            for (i, o) in oc.iter_mut().enumerate() {
                let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
                let mut s = ZERO;
                for (v, &c) in vals[lo..hi].iter().zip(&self.col_idx[lo..hi]) {
                    s += v * xc[c];
                }
                *o += s;
            }
        }
    }

    /// `out += coef * X * self` for a column-major `n × n` matrix `X`.
    pub fn right_mul_acc(&self, x: &[c64], out: &mut [c64], coef: c64) {
        let n = self.nrows;
        debug_assert_eq!(x.len(), n * n);
        for k in 0..self.nrows {
            let xc = &x[k * n..(k + 1) * n];
            for p in self.row_ptr[k]..self.row_ptr[k + 1] {
                let j = self.col_idx[p];
                let s = coef * self.values[p];
                let oc = &mut out[j * n..(j + 1) * n];
                for (o, &v) in oc.iter_mut().zip(xc) {
                    *o += s * v;
                }
            }
        }
    }

    pub fn to_faer(&self) -> SparseColMat<usize, c64> {
        let t: Vec<Triplet<usize, usize, c64>> =
            self.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .expect("triplets are in bounds and deduplicated")
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let adj = self.adjoint();
        self.sub(&adj).values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Induced 1-norm (max column sum).
    pub fn norm_one(&self) -> f64 {
        let mut cols = vec![0.0; self.ncols];
        for (_, j, v) in self.triplets() {
            cols[j] += v.norm();
        }
        cols.into_iter().fold(0.0, f64::max)
    }
}

/// Square matrix stored by diagonals. Products against column-major dense
/// matrices run as contiguous loops, which is what the Lindblad right-hand side
/// spends its time on for banded Hamiltonians and ladder operators.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    // (offset, values) with values[i] = A[i, i + offset] for the valid rows
    diags: Vec<(isize, Vec<c64>)>,
}

impl BandedMatrix {
    /// Converts when the matrix has at most `max_diags` nonzero diagonals.
    pub fn from_sparse(s: &SparseMatrix, max_diags: usize) -> Option<Self> {
        assert_eq!(s.nrows(), s.ncols());
        let n = s.nrows();
        let mut offsets: Vec<isize> = s.triplets().map(|(i, j, _)| j as isize - i as isize).collect();
        offsets.sort_unstable();
        offsets.dedup();
        if offsets.len() > max_diags {
            return None;
        }
        let mut diags: Vec<(isize, Vec<c64>)> = offsets.iter().map(|&o| (o, vec![ZERO; n - o.unsigned_abs()])).collect();
        for (i, j, v) in s.triplets() {
            let o = j as isize - i as isize;
            let k = offsets.binary_search(&o).expect("offset collected above");
            let row0 = if o < 0 { (-o) as usize } else { 0 };
            diags[k].1[i - row0] = v;
        }
        Some(BandedMatrix { n, diags })
    }

    /// `out += coef * self * X` for a column-major `n × n` matrix `X`.
    pub fn left_mul_acc(&self, x: &[c64], out: &mut [c64], coef: c64) {
        let n = self.n;
        assert_eq!(x.len(), n * n);
        assert_eq!(out.len(), n * n);
        let scaled: Vec<(isize, Vec<c64>)> =
            self.diags.iter().map(|(o, v)| (*o, v.iter().map(|a| coef * a).collect())).collect();
        for (xc, oc) in x.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            for (o, vals) in &scaled {
                let len = vals.len();
                if *o >= 0 {
                    let o = *o as usize;
                    for ((d, v), xv) in oc[..len].iter_mut().zip(vals).zip(&xc[o..o + len]) {
                        *d += v * xv;
                    }
                } else {
                    let o = (-*o) as usize;
                    for ((d, v), xv) in oc[o..o + len].iter_mut().zip(vals).zip(&xc[..len]) {
                        *d += v * xv;
                    }
                }
            }
        }
    }
}

/// Induced 1-norm of a dense matrix.
pub fn norm_one(m: &Mat<c64>) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest entry modulus.
pub fn norm_max(m: &Mat<c64>) -> f64 {
    let mut best: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub fn adjoint(m: &Mat<c64>) -> Mat<c64> {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

pub fn trace(m: &Mat<c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|k| m[(k, k)]).sum()
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
/// matching orthonormal eigenvectors as columns.
pub fn hermitian_eigen(m: &Mat<c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::EigenSolver(format!("{e:?}")))?;
    let s = evd.S();
    let vals = (0..m.nrows()).map(|k| s[k].re).collect();
    Ok((vals, evd.U().to_owned()))
}

pub fn hermitian_eigenvalues(m: &Mat<c64>) -> Result<Vec<f64>> {
    let vals = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::EigenSolver(format!("{e:?}")))?;
    Ok(vals)
}

/// Eigenvalues of a general complex matrix.
pub fn eigenvalues(m: &Mat<c64>) -> Result<Vec<c64>> {
    m.eigenvalues().map_err(|e| Error::EigenSolver(format!("{e:?}")))
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &Mat<c64>) -> Mat<c64> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA_13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm = norm_one(a);
    let s = if norm > THETA_13 { (norm / THETA_13).log2().ceil() as i32 } else { 0 };
    let scale = c64::new(0.5f64.powi(s), 0.0);
    let a = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let ident = Mat::<c64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let lin = |c: [f64; 4], m6: &Mat<c64>, m4: &Mat<c64>, m2: &Mat<c64>, id: Option<&Mat<c64>>| {
        Mat::from_fn(n, n, |i, j| {
            let mut v = m6[(i, j)] * c[0] + m4[(i, j)] * c[1] + m2[(i, j)] * c[2];
            if let Some(id) = id {
                v += id[(i, j)] * c[3];
            }
            v
        })
    };
    let inner_u = lin([B[13], B[11], B[9], 0.0], &a6, &a4, &a2, None);
    let outer_u = lin([B[7], B[5], B[3], B[1]], &a6, &a4, &a2, Some(&ident));
    let u = &a * &(&(&a6 * &inner_u) + &outer_u);
    let inner_v = lin([B[12], B[10], B[8], 0.0], &a6, &a4, &a2, None);
    let outer_v = lin([B[6], B[4], B[2], B[0]], &a6, &a4, &a2, Some(&ident));
    let v = &(&a6 * &inner_v) + &outer_v;
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Trace distance ½‖A − B‖₁ between two Hermitian matrices.
pub fn trace_distance(a: &Mat<c64>, b: &Mat<c64>) -> Result<f64> {
    let diff = a - b;
    let diff = Mat::from_fn(diff.nrows(), diff.ncols(), |i, j| 0.5 * (diff[(i, j)] + diff[(j, i)].conj()));
    Ok(0.5 * hermitian_eigenvalues(&diff)?.iter().map(|v| v.abs()).sum::<f64>())
}

/// Column-major flattening (column stacking).
pub fn vec_col_major(m: &Mat<c64>) -> Vec<c64> {
    let (r, c) = (m.nrows(), m.ncols());
    let mut out = Vec::with_capacity(r * c);
    for j in 0..c {
        for i in 0..r {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn unvec_col_major(v: &[c64], n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| v[i + j * n])
}

/// Ordinary least-squares line fit; returns `(slope, intercept, r_squared)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_dense(n: usize, seed: u64) -> Mat<c64> {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        Mat::from_fn(n, n, |_, _| c64::new(next(), next()))
    }

    #[test]
    fn sparse_dense_agree() {
        let m = random_dense(6, 3);
        let s = SparseMatrix::from_dense(&m, 0.0);
        assert!(norm_max(&(&s.to_dense() - &m)) < 1e-14);
        let p = s.matmul(&s.adjoint()).to_dense();
        let q = &m * &adjoint(&m);
        assert!(norm_max(&(&p - &q)) < 1e-13);
    }

    #[test]
    fn left_right_kernels_match_dense_products() {
        let n = 5;
        let a = random_dense(n, 7);
        let x = random_dense(n, 11);
        let s = SparseMatrix::from_dense(&a, 0.0);
        let xv = vec_col_major(&x);
        let mut out = vec![ZERO; n * n];
        s.left_mul_acc(&xv, &mut out, ONE);
        assert!(norm_max(&(&unvec_col_major(&out, n) - &(&a * &x))) < 1e-13);
        let mut out = vec![ZERO; n * n];
        s.right_mul_acc(&xv, &mut out, I);
        let expect = Mat::from_fn(n, n, |i, j| (&x * &a)[(i, j)] * I);
        assert!(norm_max(&(&unvec_col_major(&out, n) - &expect)) < 1e-13);
    }

    #[test]
    fn kron_matches_block_definition() {
        let a = SparseMatrix::from_dense(&random_dense(2, 1), 0.0);
        let b = SparseMatrix::from_dense(&random_dense(3, 2), 0.0);
        let k = SparseMatrix::kron(&a, &b);
        for ia in 0..2 {
            for ja in 0..2 {
                for ib in 0..3 {
                    for jb in 0..3 {
                        let expect = a.get(ia, ja) * b.get(ib, jb);
                        assert!((k.get(ia * 3 + ib, ja * 3 + jb) - expect).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn expm_of_diagonal_and_nilpotent() {
        let d = Mat::from_fn(3, 3, |i, j| if i == j { c64::new(i as f64, 0.5) } else { ZERO });
        let e = expm(&d);
        for k in 0..3 {
            assert!((e[(k, k)] - c64::new(k as f64, 0.5).exp()).norm() < 1e-12);
        }
        // exp of a strictly upper nilpotent matrix is a finite Taylor sum
        let mut nmat = Mat::<c64>::zeros(3, 3);
        nmat[(0, 1)] = c64::new(2.0, 0.0);
        nmat[(1, 2)] = c64::new(3.0, 0.0);
        let e = expm(&nmat);
        assert!((e[(0, 2)] - c64::new(3.0, 0.0)).norm() < 1e-12);
        assert!((e[(0, 1)] - c64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn expm_large_norm_rotation() {
        // exp(θ [[0, -1], [1, 0]]) is a rotation; large θ exercises squaring
        let theta = 40.0;
        let g = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => c64::new(-theta, 0.0),
            (1, 0) => c64::new(theta, 0.0),
            _ => ZERO,
        });
        let e = expm(&g);
        assert!((e[(0, 0)].re - theta.cos()).abs() < 1e-10);
        assert!((e[(1, 0)].re - theta.sin()).abs() < 1e-10);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (m, b, r2) = linear_fit(&x, &y);
        assert!((m + 0.5).abs() < 1e-14 && (b - 2.0).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-12);
    }
}
