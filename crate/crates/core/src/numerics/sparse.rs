use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

/// Compressed-column sparse matrix. Duplicate triplets are summed on assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &t)
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), d.len(), &t)
    }

    /// Builds from `(row, col, value)` triplets. Panics on out-of-range indices.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; ncols + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of range");
            counts[c + 1] += 1;
        }
        for c in 0..ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let k = next[c];
            rows[k] = r;
            vals[k] = v;
            next[c] += 1;
        }

        // sort each column by row and merge duplicates
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        col_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for c in 0..ncols {
            scratch.clear();
            scratch.extend((counts[c]..counts[c + 1]).map(|k| (rows[k], vals[k])));
            scratch.sort_by_key(|e| e.0);
            for &(r, v) in &scratch {
                if row_idx.len() > col_ptr[c] && *row_idx.last().unwrap() == r {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        }
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

    /// Iterates `(row, value)` of column `c`.
    pub fn col(&self, c: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.col_ptr[c]..self.col_ptr[c + 1];
        self.row_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for c in 0..self.ncols {
            out.extend(self.col(c).map(|(r, v)| (r, c, v)));
        }
        out
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.col(c).find(|e| e.0 == r).map_or(0.0, |e| e.1)
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (c, r, v))
            .collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// `diag(d) * self`
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.nrows);
        let mut out = self.clone();
        for (v, r) in out.values.iter_mut().zip(&out.row_idx) {
            *v *= d[*r];
        }
        out
    }

    /// `self * diag(d)`
    pub fn scale_cols(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.ncols);
        let mut out = self.clone();
        for c in 0..self.ncols {
            for k in out.col_ptr[c]..out.col_ptr[c + 1] {
                out.values[k] *= d[c];
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = self.triplets();
        t.extend(other.triplets());
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    /// Sparse product `self * rhs`.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.ncols, rhs.nrows);
        let mut t = Vec::new();
        for c in 0..rhs.ncols {
            for (k, b) in rhs.col(c) {
                t.extend(self.col(k).map(|(r, a)| (r, c, a * b)));
            }
        }
        Self::from_triplets(self.nrows, rhs.ncols, &t)
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_acc(x, 1.0, &mut y);
        y
    }

    /// `y += alpha * A x`
    pub fn mul_vec_acc(&self, x: &[f64], alpha: f64, y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (c, &xc) in x.iter().enumerate() {
            if xc == 0.0 {
                continue;
            }
            let s = alpha * xc;
            for (r, v) in self.col(c) {
                y[r] += v * s;
            }
        }
    }

    /// `y = Aᵀ x` without forming the transpose.
    pub fn mul_vec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        (0..self.ncols)
            .map(|c| self.col(c).map(|(r, v)| v * x[r]).sum())
            .collect()
    }

    /// Dense product `A X`.
    pub fn mul_mat(&self, x: &Mat<f64>) -> Mat<f64> {
        assert_eq!(x.nrows(), self.ncols);
        let mut out = Mat::zeros(self.nrows, x.ncols());
        for j in 0..x.ncols() {
            let y = self.mul_vec(x.col_as_slice(j));
            out.col_as_slice_mut(j).copy_from_slice(&y);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.nrows];
        for c in 0..self.ncols {
            for (r, v) in self.col(c) {
                s[r] += v;
            }
        }
        s
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for c in 0..self.ncols {
            for (r, v) in self.col(c) {
                m[(r, c)] += v;
            }
        }
        m
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let t: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .map_err(|e| Error::InvalidRange(format!("sparse conversion failed: {e:?}")))
    }
}

/// Sparse LU factorization (faer backend) with a residual-based singularity check.
pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

impl SparseLu {
    /// Factorizes a square matrix. Fails with [`Error::Singular`] naming the first
    /// zero pivot if the matrix is structurally or numerically singular.
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Dimension {
                context: "sparse LU (square)",
                expected: a.nrows,
                got: a.ncols,
            });
        }
        let n = a.nrows;
        // empty columns/rows are the cheap structural cases; name them directly
        for c in 0..n {
            if a.col(c).all(|(_, v)| v == 0.0) {
                return Err(Error::Singular { pivot: c });
            }
        }
        let mut row_hit = vec![false; n];
        for (r, _, v) in a.triplets() {
            if v != 0.0 {
                row_hit[r] = true;
            }
        }
        if let Some(r) = row_hit.iter().position(|h| !h) {
            return Err(Error::Singular { pivot: r });
        }

        let lu = a.to_faer()?.sp_lu().map_err(|e| match e {
            faer::sparse::linalg::LuError::SymbolicSingular { index } => {
                Error::Singular { pivot: index }
            }
            other => Error::InvalidRange(format!("sparse LU failed: {other:?}")),
        })?;
        let out = Self { n, lu };

        // numeric singularity shows up as a blown-up or non-finite probe solve
        let probe: Vec<f64> = (0..n)
            .map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0)
            .collect();
        let rhs = a.mul_vec(&probe);
        let x = out.solve(&rhs);
        // f64::max drops NaN, so non-finite entries are checked separately
        let err = x
            .iter()
            .zip(&probe)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if x.iter().any(|v| !v.is_finite()) || err > 1e-6 * crate::numerics::max_abs(&probe) {
            let pivot = x
                .iter()
                .zip(&probe)
                .position(|(a, b)| !(a - b).is_finite() || (a - b).abs() > 1e-6)
                .unwrap_or(0);
            return Err(Error::Singular { pivot });
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut m = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(m.as_mut());
        m.col_as_slice(0).to_vec()
    }

    /// Solves for every column of `b`.
    pub fn solve_mat(&self, b: &Mat<f64>) -> Mat<f64> {
        assert_eq!(b.nrows(), self.n);
        let mut m = b.clone();
        self.lu.solve_in_place(m.as_mut());
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poisson1d(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let lu = SparseLu::new(&SparseMatrix::identity(5)).unwrap();
        let mut b = vec![0.0; 5];
        b[2] = 1.0;
        assert_eq!(lu.solve(&b), b);
    }

    #[test]
    fn poisson_tridiagonal_solution() {
        let lu = SparseLu::new(&poisson1d(4)).unwrap();
        let x = lu.solve(&[1.0, 0.0, 0.0, 0.0]);
        for (xi, e) in x.iter().zip([0.8, 0.6, 0.4, 0.2]) {
            assert!((xi - e).abs() < 1e-14, "{x:?}");
        }
    }

    #[test]
    fn duplicates_are_summed() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 1, 1.0)]);
        assert!(matches!(
            SparseLu::new(&a),
            Err(Error::Singular { pivot: 2 })
        ));
        // numerically singular, structurally full
        let b = SparseMatrix::from_triplets(
            2,
            2,
            &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)],
        );
        assert!(matches!(SparseLu::new(&b), Err(Error::Singular { .. })));
    }

    #[test]
    fn products_match_dense() {
        let a = SparseMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (2, 0, -2.0), (1, 1, 3.0)]);
        let b = SparseMatrix::from_triplets(2, 3, &[(0, 1, 4.0), (1, 2, 0.5), (1, 0, 1.0)]);
        let c = a.matmul(&b).to_dense();
        let oracle = &a.to_dense() * &b.to_dense();
        assert_eq!(c, oracle);
        let x = [1.0, -1.0];
        let y = a.mul_vec(&x);
        assert_eq!(y, vec![1.0, -3.0, -2.0]);
        assert_eq!(
            a.transpose().mul_vec(&[1.0, 2.0, 3.0]),
            a.mul_vec_t(&[1.0, 2.0, 3.0])
        );
    }

    proptest! {
        #[test]
        fn transpose_is_involution(entries in proptest::collection::vec((0usize..6, 0usize..4, -5.0f64..5.0), 0..30)) {
            let a = SparseMatrix::from_triplets(6, 4, &entries);
            prop_assert_eq!(a.transpose().transpose(), a);
        }

        #[test]
        fn lu_residual_contract(seed in 0u64..1000, n in 2usize..30) {
            // diagonally dominant random sparse matrix
            let mut t = Vec::new();
            let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1); ((s >> 33) as f64) / (1u64 << 31) as f64 - 0.5 };
            for i in 0..n {
                t.push((i, i, 4.0 + next()));
                let j = ((next() + 0.5) * n as f64) as usize % n;
                if j != i { t.push((i, j, next())); }
            }
            let a = SparseMatrix::from_triplets(n, n, &t);
            let b: Vec<f64> = (0..n).map(|_| next()).collect();
            let x = SparseLu::new(&a).unwrap().solve(&b);
            let r = crate::numerics::sub(&a.mul_vec(&x), &b);
            prop_assert!(crate::numerics::norm2(&r) <= 1e-10 * crate::numerics::norm2(&b).max(1e-300));
        }
    }
}
