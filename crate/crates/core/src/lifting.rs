//! Lifting of boundary data, snapshot homogenization and Omega-weighted POD.

use faer::Mat;

use crate::boundary::{BcReduction, BoundaryModel};
use crate::error::{Error, Result};
use crate::fom::{exact_lifting, SnapshotSet};
use crate::mesh::Operators;
use crate::numerics::{matvec, max_abs, qr_orthonormalize, thin_svd, RANK_TOL};

/// Approximated lifting `F_inhom = Omega^-1 G Lbar^-1 F_M Phi_bc`.
#[derive(Debug, Clone)]
pub struct LiftingOperator {
    /// `N_V x R_bc`
    pub f_inhom: Mat<f64>,
}

impl LiftingOperator {
    /// One Poisson solve per boundary mode.
    pub fn build(ops: &Operators, bc: &BcReduction) -> Result<Self> {
        let n = ops.n_vel();
        let mut f_inhom = Mat::zeros(n, bc.r_bc());
        for k in 0..bc.r_bc() {
            let col = exact_lifting(ops, bc.phi.col_as_slice(k))?;
            f_inhom.col_as_slice_mut(k).copy_from_slice(&col);
        }
        Ok(Self { f_inhom })
    }

    /// `F_inhom c`
    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        matvec(&self.f_inhom, c)
    }

    pub fn truncate(&self, r: usize) -> Self {
        let r = r.min(self.f_inhom.ncols());
        Self {
            f_inhom: Mat::from_fn(self.f_inhom.nrows(), r, |i, j| self.f_inhom[(i, j)]),
        }
    }
}

/// Subtracts the exact lifting of the trace from every snapshot, in place.
pub fn homogenize_snapshots(
    snaps: &mut SnapshotSet,
    ops: &Operators,
    model: &BoundaryModel,
) -> Result<()> {
    for j in 0..snaps.velocity.ncols() {
        let t = snaps.time.t(j);
        let lift = exact_lifting(ops, &model.eval(&ops.grid, t))?;
        for (x, l) in snaps.velocity.col_as_slice_mut(j).iter_mut().zip(&lift) {
            *x -= l;
        }
    }
    Ok(())
}

/// Homogenized copy of the velocity snapshots, leaving `snaps` untouched.
pub fn homogenized_copy(
    snaps: &SnapshotSet,
    ops: &Operators,
    model: &BoundaryModel,
) -> Result<Mat<f64>> {
    let mut x = snaps.velocity.clone();
    for j in 0..x.ncols() {
        let lift = exact_lifting(ops, &model.eval(&ops.grid, snaps.time.t(j)))?;
        for (v, l) in x.col_as_slice_mut(j).iter_mut().zip(&lift) {
            *v -= l;
        }
    }
    Ok(x)
}

/// Omega-orthonormal POD basis.
#[derive(Debug, Clone)]
pub struct PodBasis {
    /// `N_V x R`, `Phiᵀ Omega Phi = I`.
    pub phi: Mat<f64>,
    /// Singular values of `Omega^{1/2} X`, non-increasing.
    pub singular_values: Vec<f64>,
    /// Count of singular values above `RANK_TOL` relative.
    pub numerical_rank: usize,
}

impl PodBasis {
    pub fn r(&self) -> usize {
        self.phi.ncols()
    }

    pub fn truncate(&self, r: usize) -> Self {
        let r = r.min(self.r());
        Self {
            phi: Mat::from_fn(self.phi.nrows(), r, |i, j| self.phi[(i, j)]),
            singular_values: self.singular_values.clone(),
            numerical_rank: self.numerical_rank,
        }
    }

    /// Number of singular values above `rel` times the largest.
    pub fn count_above(&self, rel: f64) -> usize {
        let s0 = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values
            .iter()
            .filter(|&&s| s > rel * s0)
            .count()
    }
}

/// POD in the `Omega` inner product via the thin SVD of `Omega^{1/2} X`.
/// Requests above the numerical rank are truncated with a warning.
pub fn pod(x: &Mat<f64>, omega: &[f64], r: usize) -> Result<PodBasis> {
    if x.nrows() != omega.len() {
        return Err(Error::Dimension {
            context: "POD weight",
            expected: x.nrows(),
            got: omega.len(),
        });
    }
    let sw: Vec<f64> = omega.iter().map(|w| w.sqrt()).collect();
    let y = Mat::from_fn(x.nrows(), x.ncols(), |i, j| sw[i] * x[(i, j)]);
    let svd = thin_svd(&y)?;
    drop(y);
    let rank = svd.rank(RANK_TOL);
    let keep = if r > rank {
        log::warn!("requested {r} POD modes, numerical rank is {rank}; truncating");
        rank
    } else {
        r
    };
    let phi = Mat::from_fn(x.nrows(), keep, |i, j| svd.u[(i, j)] / sw[i]);
    Ok(PodBasis {
        phi,
        singular_values: svd.s,
        numerical_rank: rank,
    })
}

/// [`pod`] of homogenized snapshots, with every mode projected back onto the
/// discretely divergence-free space and re-orthonormalized.
///
/// Round-off in the snapshots is amplified by `sigma_1 / sigma_j` in mode `j`,
/// so without the projection the tail modes carry a visible divergence.
pub fn homogeneous_pod(x: &Mat<f64>, ops: &Operators, r: usize) -> Result<PodBasis> {
    let mut basis = pod(x, &ops.omega, r)?;
    let mut worst = 0.0_f64;
    for j in 0..basis.r() {
        let col = basis.phi.col_as_slice_mut(j);
        let div = ops.m.mul_vec(col);
        worst = worst.max(max_abs(&div) / max_abs(col));
        let corr = ops.lift_rhs(&div)?;
        col.iter_mut().zip(&corr).for_each(|(x, c)| *x -= c);
    }
    log::debug!("largest relative mode divergence before projection: {worst:.2e}");
    let q = qr_orthonormalize(&basis.phi, &ops.omega);
    if q.ncols() < basis.r() {
        log::warn!(
            "{} POD modes lost after divergence projection",
            basis.r() - q.ncols()
        );
    }
    basis.phi = q;
    Ok(basis)
}
