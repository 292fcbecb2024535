//! Linear-algebra building blocks shared by the mesh, FOM and ROM layers.
//!
//! Dense matrices are plain [`faer::Mat<f64>`] (column-major). Sparse matrices use
//! the crate's own compressed-column [`SparseMatrix`], which converts to faer for
//! factorization.

mod dense;
mod sparse;

pub use dense::{
    all_finite, dense_lu, gram_weighted, mat_from_cols, matvec, matvec_t, qr_orthonormalize,
    thin_svd, DenseLu, Svd,
};
pub use sparse::{SparseLu, SparseMatrix};

/// Singular values at or below this fraction of the largest one are treated as zero.
pub const RANK_TOL: f64 = 1e-10;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `sqrt(sum w_i a_i^2)`
pub fn weighted_norm(a: &[f64], w: &[f64]) -> f64 {
    a.iter()
        .zip(w)
        .map(|(x, wi)| wi * x * x)
        .sum::<f64>()
        .sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| {
        if x.is_nan() || m.is_nan() {
            f64::NAN
        } else {
            m.max(x.abs())
        }
    })
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
