use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;

use super::{dot, RANK_TOL};
use crate::error::{Error, Result};

pub fn all_finite(m: &Mat<f64>) -> bool {
    (0..m.ncols()).all(|j| m.col_as_slice(j).iter().all(|v| v.is_finite()))
}

pub fn mat_from_cols(nrows: usize, cols: &[Vec<f64>]) -> Mat<f64> {
    let mut m = Mat::zeros(nrows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        assert_eq!(c.len(), nrows);
        m.col_as_slice_mut(j).copy_from_slice(c);
    }
    m
}

/// `A x`
pub fn matvec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![0.0; a.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            for (yi, aij) in y.iter_mut().zip(a.col_as_slice(j)) {
                *yi += aij * xj;
            }
        }
    }
    y
}

/// `Aᵀ x`
pub fn matvec_t(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.nrows(), x.len());
    (0..a.ncols()).map(|j| dot(a.col_as_slice(j), x)).collect()
}

/// `Aᵀ diag(w) B`
pub fn gram_weighted(a: &Mat<f64>, w: &[f64], b: &Mat<f64>) -> Mat<f64> {
    assert_eq!(a.nrows(), w.len());
    assert_eq!(b.nrows(), w.len());
    let wb = Mat::from_fn(b.nrows(), b.ncols(), |i, j| w[i] * b[(i, j)]);
    a.transpose() * &wb
}

/// Thin SVD `X = U diag(s) Vt`, singular values non-increasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub vt: Mat<f64>,
}

impl Svd {
    /// Number of singular values above `rel * s[0]`.
    pub fn rank(&self, rel: f64) -> usize {
        let s0 = self.s.first().copied().unwrap_or(0.0);
        self.s.iter().filter(|&&s| s > rel * s0).count()
    }
}

pub fn thin_svd(x: &Mat<f64>) -> Result<Svd> {
    if !all_finite(x) {
        return Err(Error::NonFinite { step: 0 });
    }
    let k = x.nrows().min(x.ncols());
    if k == 0 {
        return Ok(Svd {
            u: Mat::zeros(x.nrows(), 0),
            s: Vec::new(),
            vt: Mat::zeros(0, x.ncols()),
        });
    }
    let svd = x
        .thin_svd()
        .map_err(|e| Error::InvalidRange(format!("svd did not converge: {e:?}")))?;
    let s_raw: Vec<f64> = (0..k).map(|i| svd.S().column_vector()[i]).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s_raw[b].total_cmp(&s_raw[a]));
    let u = Mat::from_fn(x.nrows(), k, |i, j| svd.U()[(i, order[j])]);
    let vt = Mat::from_fn(k, x.ncols(), |i, j| svd.V()[(j, order[i])]);
    let s = order.iter().map(|&i| s_raw[i].max(0.0)).collect();
    Ok(Svd { u, s, vt })
}

/// Orthonormalizes the columns of `a` in the inner product `<x, y> = xᵀ diag(w) y`
/// using classical Gram-Schmidt with reorthogonalization. Columns whose remaining
/// weighted norm falls below `RANK_TOL` times the largest input column norm are
/// dropped, so the result spans the numerically independent part of `Im(a)`.
pub fn qr_orthonormalize(a: &Mat<f64>, w: &[f64]) -> Mat<f64> {
    assert_eq!(a.nrows(), w.len());
    assert!(w.iter().all(|&x| x > 0.0), "weight must be positive");
    let n = a.nrows();
    let wnorm = |v: &[f64]| {
        v.iter()
            .zip(w)
            .map(|(x, wi)| wi * x * x)
            .sum::<f64>()
            .sqrt()
    };
    let scale = (0..a.ncols())
        .map(|j| wnorm(a.col_as_slice(j)))
        .fold(0.0_f64, f64::max);
    let mut q: Vec<Vec<f64>> = Vec::new();
    if scale == 0.0 {
        return Mat::zeros(n, 0);
    }
    for j in 0..a.ncols() {
        let mut v = a.col_as_slice(j).to_vec();
        for _pass in 0..2 {
            let wv: Vec<f64> = v.iter().zip(w).map(|(x, wi)| x * wi).collect();
            let coeffs: Vec<f64> = q.iter().map(|qk| dot(qk, &wv)).collect();
            for (qk, c) in q.iter().zip(coeffs) {
                for (vi, qi) in v.iter_mut().zip(qk) {
                    *vi -= c * qi;
                }
            }
        }
        let nv = wnorm(&v);
        if nv > RANK_TOL * scale {
            v.iter_mut().for_each(|x| *x /= nv);
            q.push(v);
        }
    }
    mat_from_cols(n, &q)
}

/// Dense LU with partial pivoting plus a 2-norm condition number.
pub struct DenseLu {
    lu: PartialPivLu<f64>,
    n: usize,
    cond: f64,
}

impl std::fmt::Debug for DenseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DenseLu")
            .field("n", &self.n)
            .field("cond", &self.cond)
            .finish()
    }
}

impl DenseLu {
    pub fn cond(&self) -> f64 {
        self.cond
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut m = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(m.as_mut());
        m.col_as_slice(0).to_vec()
    }

    pub fn solve_mat(&self, b: &Mat<f64>) -> Mat<f64> {
        let mut m = b.clone();
        self.lu.solve_in_place(m.as_mut());
        m
    }
}

/// Factorizes a small dense square matrix, refusing condition numbers above `cond_limit`.
pub fn dense_lu(a: &Mat<f64>, cond_limit: f64) -> Result<DenseLu> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension {
            context: "dense LU (square)",
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    let n = a.nrows();
    let cond = if n == 0 {
        1.0
    } else {
        let s = thin_svd(a)?.s;
        if s[n - 1] == 0.0 {
            f64::INFINITY
        } else {
            s[0] / s[n - 1]
        }
    };
    if cond.is_nan() || cond > cond_limit {
        return Err(Error::IllConditioned {
            cond,
            limit: cond_limit,
        });
    }
    Ok(DenseLu {
        lu: a.partial_piv_lu(),
        n,
        cond,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn max_abs_mat(m: &Mat<f64>) -> f64 {
        (0..m.ncols())
            .flat_map(|j| m.col_as_slice(j).to_vec())
            .fold(0.0, |a: f64, b| a.max(b.abs()))
    }

    #[test]
    fn svd_of_diagonal() {
        let x = Mat::from_fn(2, 2, |i, j| if i == j { [3.0, 1.0][i] } else { 0.0 });
        let s = thin_svd(&x).unwrap().s;
        assert!((s[0] - 3.0).abs() < 1e-14 && (s[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn svd_of_repeated_column() {
        let v = [1.0, -2.0, 0.5, 3.0];
        let k = 5;
        let x = Mat::from_fn(4, k, |i, _| v[i]);
        let svd = thin_svd(&x).unwrap();
        assert_eq!(svd.rank(1e-12), 1);
        let expect = super::super::norm2(&v) * (k as f64).sqrt();
        assert!((svd.s[0] - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn svd_matches_gram_eigen_oracle() {
        let x = random(20, 8, 7);
        let svd = thin_svd(&x).unwrap();
        let recon =
            &svd.u * Mat::from_fn(8, 8, |i, j| if i == j { svd.s[i] } else { 0.0 }) * &svd.vt;
        let fro = |m: &Mat<f64>| m.norm_l2();
        assert!(fro(&(&recon - &x)) <= 1e-12 * fro(&x));
        let utu = svd.u.transpose() * &svd.u;
        assert!(max_abs_mat(&(&utu - Mat::<f64>::identity(8, 8))) < 1e-12);

        // independent oracle: eigenvalues of XᵀX via nalgebra
        let xn = nalgebra::DMatrix::from_fn(20, 8, |i, j| x[(i, j)]);
        let mut ev: Vec<f64> = (xn.transpose() * &xn)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|l| l.max(0.0).sqrt())
            .collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in svd.s.iter().zip(&ev) {
            assert!((a - b).abs() < 1e-12 * ev[0]);
        }
    }

    #[test]
    fn svd_invariant_under_column_permutation() {
        let x = random(15, 6, 11);
        let perm = [3, 0, 5, 1, 4, 2];
        let xp = Mat::from_fn(15, 6, |i, j| x[(i, perm[j])]);
        let a = thin_svd(&x).unwrap().s;
        let b = thin_svd(&xp).unwrap().s;
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() <= 1e-12 * a[0]);
        }
    }

    #[test]
    fn qr_trivial_cases() {
        let e1 = Mat::from_fn(3, 1, |i, _| if i == 0 { 1.0 } else { 0.0 });
        let q = qr_orthonormalize(&e1, &[1.0; 3]);
        assert_eq!(q, e1);
        let v = [1.0, 2.0, -1.0];
        let a = Mat::from_fn(3, 2, |i, j| v[i] * (j + 1) as f64);
        assert_eq!(qr_orthonormalize(&a, &[1.0; 3]).ncols(), 1);
    }

    #[test]
    fn qr_weighted_projector_matches_svd_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 30;
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
        let mut a = random(n, 5, 5);
        // make the last column dependent
        for i in 0..n {
            a[(i, 4)] = a[(i, 0)] - 2.0 * a[(i, 2)];
        }
        let q = qr_orthonormalize(&a, &w);
        assert_eq!(q.ncols(), 4);
        let qtwq = gram_weighted(&q, &w, &q);
        assert!(max_abs_mat(&(&qtwq - Mat::<f64>::identity(4, 4))) < 1e-12);

        // oracle: range of W^{1/2} A from SVD, mapped back
        let sw: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
        let wa = Mat::from_fn(n, 5, |i, j| sw[i] * a[(i, j)]);
        let svd = thin_svd(&wa).unwrap();
        let r = svd.rank(RANK_TOL);
        let u = Mat::from_fn(n, r, |i, j| svd.u[(i, j)]);
        // P = Q Qᵀ W  vs  W^{-1/2} U Uᵀ W^{1/2}
        let p_qr = &q * gram_weighted(&q, &w, &Mat::<f64>::identity(n, n));
        let uut = &u * u.transpose();
        let p_svd = Mat::from_fn(n, n, |i, j| uut[(i, j)] * sw[j] / sw[i]);
        assert!(max_abs_mat(&(&p_qr - &p_svd)) < 1e-12);
    }

    #[test]
    fn dense_lu_rejects_singular() {
        let a = Mat::from_fn(2, 2, |_, _| 1.0);
        assert!(matches!(
            dense_lu(&a, 1e12),
            Err(Error::IllConditioned { .. })
        ));
        let b = Mat::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 0.5 });
        let lu = dense_lu(&b, 1e12).unwrap();
        let x = lu.solve(&[2.5, 2.5]);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
