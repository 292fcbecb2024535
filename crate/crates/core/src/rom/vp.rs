use faer::Mat;

use super::offline::QuadraticSystem;
use crate::boundary::BcReduction;
use crate::error::Result;
use crate::lifting::{LiftingOperator, PodBasis};
use crate::mesh::Operators;
use crate::numerics::{
    dense_lu, gram_weighted, max_abs, qr_orthonormalize, thin_svd, DenseLu, RANK_TOL,
};

/// Condition-number ceiling for the reduced Poisson matrix.
pub const LR_COND_LIMIT: f64 = 1e12;

/// Numerical evidence for the conditions under which the velocity-pressure model
/// reproduces the velocity-only one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremChecks {
    /// `max |Phiᵀ Omega Phi - I|`
    pub orthonormality: f64,
    /// `max |Phi_homᵀ G Psi|` relative to `max |Phiᵀ G Psi|`
    pub homogeneous_pressure: f64,
    /// Relative Omega-norm of the part of `F_inhom` outside `span(Phi_inhom)`.
    pub lifting_outside_span: f64,
    /// Rank of `Psiᵀ M Phi` at the relative threshold.
    pub rank_b: usize,
    pub r_p: usize,
    /// Condition number of `L_r`.
    pub cond_lr: f64,
}

/// Velocity-pressure model with `Phi = [Phi_hom Phi_inhom]`, `Psi = M Phi_inhom`.
#[derive(Debug)]
pub struct VpRomOperators {
    pub system: QuadraticSystem,
    /// `N_V x R_V`
    pub phi: Mat<f64>,
    pub r_hom: usize,
    /// Column of `F_inhom` each inhomogeneous mode was created from.
    pub inhom_source: Vec<usize>,
    /// `Psiᵀ M Phi`, `R_p x R_V`
    pub div_r: Mat<f64>,
    /// `Phiᵀ G Psi`, `R_V x R_p`
    pub grad_r: Mat<f64>,
    /// `Psiᵀ F_M Phi_bc`, `R_p x R_bc`
    pub bc_r: Mat<f64>,
    pub l_r: DenseLu,
    pub checks: TheoremChecks,
}

impl VpRomOperators {
    pub fn build(
        ops: &Operators,
        pod: &PodBasis,
        lift: &LiftingOperator,
        bc: &BcReduction,
    ) -> Result<Self> {
        let n = ops.n_vel();
        let r_hom = pod.r();
        // orthonormalize column by column to remember which lifting column survives
        let mut phi_inhom_cols: Vec<Vec<f64>> = Vec::new();
        let mut inhom_source = Vec::new();
        let q = qr_orthonormalize(&lift.f_inhom, &ops.omega);
        if q.ncols() == lift.f_inhom.ncols() {
            for j in 0..q.ncols() {
                phi_inhom_cols.push(q.col_as_slice(j).to_vec());
                inhom_source.push(j);
            }
        } else {
            for k in 0..lift.f_inhom.ncols() {
                let prefix = Mat::from_fn(n, k + 1, |i, j| lift.f_inhom[(i, j)]);
                let qk = qr_orthonormalize(&prefix, &ops.omega);
                if qk.ncols() > phi_inhom_cols.len() {
                    phi_inhom_cols.push(qk.col_as_slice(qk.ncols() - 1).to_vec());
                    inhom_source.push(k);
                }
            }
        }
        // span(F_inhom) is Omega-orthogonal to Phi_hom only up to round-off, and
        // nearly dependent lifting columns amplify that; re-orthogonalize
        // against everything before each column (two passes)
        let dot_w = |x: &[f64], y: &[f64]| -> f64 {
            x.iter()
                .zip(y)
                .zip(&ops.omega)
                .map(|((a, b), w)| a * b * w)
                .sum()
        };
        for k in 0..phi_inhom_cols.len() {
            let mut v = std::mem::take(&mut phi_inhom_cols[k]);
            for _ in 0..2 {
                for j in 0..r_hom {
                    let col = pod.phi.col_as_slice(j);
                    let h = dot_w(col, &v);
                    v.iter_mut().zip(col).for_each(|(x, c)| *x -= h * c);
                }
                for prev in &phi_inhom_cols[..k] {
                    let h = dot_w(prev, &v);
                    v.iter_mut().zip(prev).for_each(|(x, c)| *x -= h * c);
                }
            }
            let nrm = dot_w(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= nrm);
            phi_inhom_cols[k] = v;
        }
        let r_in = phi_inhom_cols.len();
        let phi = Mat::from_fn(n, r_hom + r_in, |i, j| {
            if j < r_hom {
                pod.phi[(i, j)]
            } else {
                phi_inhom_cols[j - r_hom][i]
            }
        });
        drop(phi_inhom_cols);

        let mut psi = Mat::zeros(ops.n_p(), r_in);
        for j in 0..r_in {
            let col = ops.m.mul_vec(phi.col_as_slice(r_hom + j));
            psi.col_as_slice_mut(j).copy_from_slice(&col);
        }
        let m_phi = ops.m.mul_mat(&phi);
        let div_r = psi.transpose() * &m_phi;
        // gradient applied through G = -Mᵀ on each pressure mode, then projected
        let mut g_psi = Mat::zeros(n, r_in);
        for j in 0..r_in {
            let col = ops.apply_g(psi.col_as_slice(j));
            g_psi.col_as_slice_mut(j).copy_from_slice(&col);
        }
        let grad_r = phi.transpose() * &g_psi;
        let bc_r = psi.transpose() * ops.fm.mul_mat(&bc.phi);

        let zero_vel = Mat::zeros(n, bc.r_bc());
        let system = QuadraticSystem::build(ops, &phi, &zero_vel, &bc.phi)?;

        let lifting_outside_span = {
            let sub = Mat::from_fn(n, r_in, |i, j| phi[(i, r_hom + j)]);
            let coef = gram_weighted(&sub, &ops.omega, &lift.f_inhom);
            let resid = &lift.f_inhom - &sub * &coef;
            let num = (0..resid.ncols())
                .map(|j| crate::numerics::weighted_norm(resid.col_as_slice(j), &ops.omega))
                .fold(0.0, f64::max);
            let den = (0..lift.f_inhom.ncols())
                .map(|j| crate::numerics::weighted_norm(lift.f_inhom.col_as_slice(j), &ops.omega))
                .fold(0.0, f64::max);
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        };
        let orthonormality = {
            let g = gram_weighted(&phi, &ops.omega, &phi);
            let e = &g - Mat::<f64>::identity(g.nrows(), g.ncols());
            mat_max(&e)
        };
        Self::assemble(
            system,
            phi,
            r_hom,
            inhom_source,
            div_r,
            grad_r,
            bc_r,
            orthonormality,
            lifting_outside_span,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        system: QuadraticSystem,
        phi: Mat<f64>,
        r_hom: usize,
        inhom_source: Vec<usize>,
        div_r: Mat<f64>,
        grad_r: Mat<f64>,
        bc_r: Mat<f64>,
        orthonormality: f64,
        lifting_outside_span: f64,
    ) -> Result<Self> {
        let r_p = div_r.nrows();
        let l = &div_r * &grad_r;
        let l_r = dense_lu(&l, LR_COND_LIMIT)?;
        let rank_b = if r_p == 0 {
            0
        } else {
            thin_svd(&div_r)?.rank(RANK_TOL)
        };
        let hom_block = Mat::from_fn(r_hom, r_p, |i, j| grad_r[(i, j)]);
        let homogeneous_pressure = mat_max(&hom_block) / mat_max(&grad_r).max(f64::MIN_POSITIVE);
        let checks = TheoremChecks {
            orthonormality,
            homogeneous_pressure,
            lifting_outside_span,
            rank_b,
            r_p,
            cond_lr: l_r.cond(),
        };
        Ok(Self {
            system,
            phi,
            r_hom,
            inhom_source,
            div_r,
            grad_r,
            bc_r,
            l_r,
            checks,
        })
    }

    pub fn r_v(&self) -> usize {
        self.phi.ncols()
    }

    pub fn r_p(&self) -> usize {
        self.div_r.nrows()
    }

    pub fn r_bc(&self) -> usize {
        self.system.rc
    }

    /// Keeps `r_hom` homogeneous modes and the inhomogeneous modes generated by
    /// the first `r_bc` boundary modes.
    pub fn truncate(&self, r_hom: usize, r_bc: usize) -> Result<Self> {
        let r_hom = r_hom.min(self.r_hom);
        let r_bc = r_bc.min(self.r_bc());
        let inh: Vec<usize> = (0..self.inhom_source.len())
            .filter(|&j| self.inhom_source[j] < r_bc)
            .collect();
        let ai: Vec<usize> = (0..r_hom)
            .chain(inh.iter().map(|j| self.r_hom + j))
            .collect();
        let ci: Vec<usize> = (0..r_bc).collect();
        let phi = Mat::from_fn(self.phi.nrows(), ai.len(), |i, j| self.phi[(i, ai[j])]);
        let div_r = Mat::from_fn(inh.len(), ai.len(), |i, j| self.div_r[(inh[i], ai[j])]);
        let grad_r = Mat::from_fn(ai.len(), inh.len(), |i, j| self.grad_r[(ai[i], inh[j])]);
        let bc_r = Mat::from_fn(inh.len(), r_bc, |i, j| self.bc_r[(inh[i], j)]);
        Self::assemble(
            self.system.select(&ai, &ci),
            phi,
            r_hom,
            inh.iter().map(|&j| self.inhom_source[j]).collect(),
            div_r,
            grad_r,
            bc_r,
            self.checks.orthonormality,
            self.checks.lifting_outside_span,
        )
    }

    /// Enforces `div_r a = bc_r c` by subtracting `grad_r beta`; returns `beta`.
    pub fn project(&self, a: &mut [f64], c: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.r_p()];
        for (i, ri) in r.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, aj) in a.iter().enumerate() {
                s += self.div_r[(i, j)] * aj;
            }
            for (k, ck) in c.iter().enumerate() {
                s -= self.bc_r[(i, k)] * ck;
            }
            *ri = s;
        }
        let beta = self.l_r.solve(&r);
        for (j, aj) in a.iter_mut().enumerate() {
            for (i, bi) in beta.iter().enumerate() {
                *aj -= self.grad_r[(j, i)] * bi;
            }
        }
        beta
    }

    /// `da/dt` and the reduced pressure `b` for coefficients `a`, boundary
    /// coefficients `c` and their rates `dc`.
    pub fn rhs(&self, a: &[f64], c: &[f64], dc: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let f = self.system.rhs(a, c);
        let r_p = self.r_p();
        // L_r b = -Psiᵀ F_M Phi_bc dc + (Psiᵀ M Phi) f
        let mut rhs = vec![0.0; r_p];
        for (i, r) in rhs.iter_mut().enumerate() {
            let mut s = 0.0;
            for (k, d) in dc.iter().enumerate() {
                s -= self.bc_r[(i, k)] * d;
            }
            for (j, fj) in f.iter().enumerate() {
                s += self.div_r[(i, j)] * fj;
            }
            *r = s;
        }
        let b = self.l_r.solve(&rhs);
        let mut da = f;
        for (j, d) in da.iter_mut().enumerate() {
            for (i, bi) in b.iter().enumerate() {
                *d -= self.grad_r[(j, i)] * bi;
            }
        }
        (da, b)
    }
}

fn mat_max(m: &Mat<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| max_abs(m.col_as_slice(j)))
        .fold(0.0, f64::max)
}
