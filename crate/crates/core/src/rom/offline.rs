use faer::linalg::matmul::matmul;
use faer::{Accum, Mat};

use crate::boundary::BcReduction;
use crate::error::{Error, Result};
use crate::lifting::{LiftingOperator, PodBasis};
use crate::mesh::Operators;
use crate::numerics::{gram_weighted, matvec_t, max_abs};

/// Reduced right-hand side `W^T F(V, y)` for `V = sum a_i A_i + sum c_k B_k`,
/// `y = sum c_k Y_k`, expanded into constant, linear and quadratic parts:
///
/// `k0 + La a + Lc c + Qaa (a x a) + Qac (a x c) + Qcc (c x c)`
///
/// The test space `W` is the set of velocity modes `A`. Quadratic tensors are
/// stored matricized, with the Kronecker index `i * n2 + j`; internally each is
/// kept as blocks `[i][r][j]` so a contraction streams contiguous rows.
#[derive(Debug, Clone)]
pub struct QuadraticSystem {
    pub ra: usize,
    pub rc: usize,
    pub k0: Vec<f64>,
    /// `ra x ra`, column-major.
    pub la: Mat<f64>,
    /// `ra x rc`
    pub lc: Mat<f64>,
    qaa: Vec<f64>,
    qac: Vec<f64>,
    qcc: Vec<f64>,
    packed: Packed,
}

/// Evaluation layout: one length-`ra` column per coefficient pair, with the
/// symmetric `a x a` and `c x c` forms folded onto `i <= j`.
#[derive(Debug, Clone, Default)]
struct Packed {
    aa: Vec<f64>,
    ac: Vec<f64>,
    cc: Vec<f64>,
}

impl QuadraticSystem {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        ra: usize,
        rc: usize,
        k0: Vec<f64>,
        la: Mat<f64>,
        lc: Mat<f64>,
        qaa: Vec<f64>,
        qac: Vec<f64>,
        qcc: Vec<f64>,
    ) -> Self {
        let mut s = Self {
            ra,
            rc,
            k0,
            la,
            lc,
            qaa,
            qac,
            qcc,
            packed: Packed::default(),
        };
        let mut p = Packed {
            aa: Vec::with_capacity(ra * ra * (ra + 1) / 2),
            ac: Vec::with_capacity(ra * ra * rc),
            cc: Vec::with_capacity(ra * rc * (rc + 1) / 2),
        };
        for i in 0..ra {
            for j in i..ra {
                p.aa.extend((0..ra).map(|r| {
                    if i == j {
                        s.qaa(r, i, i)
                    } else {
                        s.qaa(r, i, j) + s.qaa(r, j, i)
                    }
                }));
            }
            for k in 0..rc {
                p.ac.extend((0..ra).map(|r| s.qac(r, i, k)));
            }
        }
        for k in 0..rc {
            for l in k..rc {
                p.cc.extend((0..ra).map(|r| {
                    if k == l {
                        s.qcc(r, k, k)
                    } else {
                        s.qcc(r, k, l) + s.qcc(r, l, k)
                    }
                }));
            }
        }
        s.packed = p;
        s
    }

    /// Evaluates every basis pair of the convective form and projects it.
    ///
    /// `a_vel` are the velocity parts of the `a` modes (their boundary parts are
    /// zero); `c_vel`/`c_bc` are the velocity and boundary parts of the `c` modes.
    pub fn build(
        ops: &Operators,
        a_vel: &Mat<f64>,
        c_vel: &Mat<f64>,
        c_bc: &Mat<f64>,
    ) -> Result<Self> {
        let n = ops.n_vel();
        let (ra, rc) = (a_vel.ncols(), c_vel.ncols());
        if a_vel.nrows() != n
            || c_vel.nrows() != n
            || c_bc.nrows() != ops.n_bc()
            || c_bc.ncols() != rc
        {
            return Err(Error::Dimension {
                context: "reduced basis shapes",
                expected: n,
                got: a_vel.nrows(),
            });
        }
        let zero_bc = vec![0.0; ops.n_bc()];
        let zero_v = vec![0.0; n];

        // constant and linear parts
        let base = ops.eval_linear(&zero_v, &zero_bc);
        let k0 = matvec_t(a_vel, &base);
        let lin = |v: &[f64], y: &[f64]| -> Vec<f64> {
            let mut out = ops.d.mul_vec(v);
            ops.dbc.mul_vec_acc(y, 1.0, &mut out);
            matvec_t(a_vel, &out)
        };
        let mut la = Mat::zeros(ra, ra);
        for i in 0..ra {
            la.col_as_slice_mut(i)
                .copy_from_slice(&lin(a_vel.col_as_slice(i), &zero_bc));
        }
        let mut lc = Mat::zeros(ra, rc);
        for k in 0..rc {
            lc.col_as_slice_mut(k)
                .copy_from_slice(&lin(c_vel.col_as_slice(k), c_bc.col_as_slice(k)));
        }

        // extended modes, their convecting fluxes and convected face values
        let p_total = ra + rc;
        let ext_of = |p: usize| -> Vec<f64> {
            if p < ra {
                ops.extend(a_vel.col_as_slice(p), &zero_bc)
            } else {
                ops.extend(c_vel.col_as_slice(p - ra), c_bc.col_as_slice(p - ra))
            }
        };
        let mut values: Vec<[f64; 4]> = Vec::with_capacity(p_total * n);
        for p in 0..p_total {
            values.extend(ops.face_values(&ext_of(p)));
        }

        // T[:, p, q] = Wᵀ C(Z_p, Z_q)
        let mut t = vec![0.0; ra * p_total * p_total];
        let mut b = Mat::<f64>::zeros(n, p_total);
        let mut proj = Mat::<f64>::zeros(ra, p_total);
        let par = faer::get_global_parallelism();
        for p in 0..p_total {
            let flux = ops.face_fluxes(&ext_of(p));
            for q in 0..p_total {
                let vq = &values[q * n..(q + 1) * n];
                let col = b.col_as_slice_mut(q);
                for k in 0..n {
                    let (fl, cv) = (&flux[k], &vq[k]);
                    col[k] = fl[0] * cv[0] + fl[1] * cv[1] + fl[2] * cv[2] + fl[3] * cv[3];
                }
            }
            matmul(
                proj.as_mut(),
                Accum::Replace,
                a_vel.transpose(),
                b.as_ref(),
                1.0,
                par,
            );
            for q in 0..p_total {
                for r in 0..ra {
                    t[(p * p_total + q) * ra + r] = proj[(r, q)];
                }
            }
        }
        let tt = |r: usize, p: usize, q: usize| t[(p * p_total + q) * ra + r];

        let mut qaa = vec![0.0; ra * ra * ra];
        for i in 0..ra {
            for r in 0..ra {
                for j in 0..ra {
                    qaa[(i * ra + r) * ra + j] = tt(r, i, j);
                }
            }
        }
        let mut qac = vec![0.0; ra * ra * rc];
        for i in 0..ra {
            for r in 0..ra {
                for k in 0..rc {
                    // both orderings of the mixed pair
                    qac[(i * ra + r) * rc + k] = tt(r, i, ra + k) + tt(r, ra + k, i);
                }
            }
        }
        let mut qcc = vec![0.0; rc * ra * rc];
        for k in 0..rc {
            for r in 0..ra {
                for l in 0..rc {
                    qcc[(k * ra + r) * rc + l] = tt(r, ra + k, ra + l);
                }
            }
        }
        Ok(Self::assemble(ra, rc, k0, la, lc, qaa, qac, qcc))
    }

    /// Matricized entry `Qaa[r, i * ra + j]`.
    pub fn qaa(&self, r: usize, i: usize, j: usize) -> f64 {
        self.qaa[(i * self.ra + r) * self.ra + j]
    }

    /// Matricized entry `Qac[r, i * rc + k]`.
    pub fn qac(&self, r: usize, i: usize, k: usize) -> f64 {
        self.qac[(i * self.ra + r) * self.rc + k]
    }

    /// Matricized entry `Qcc[r, k * rc + l]`.
    pub fn qcc(&self, r: usize, k: usize, l: usize) -> f64 {
        self.qcc[(k * self.ra + r) * self.rc + l]
    }

    /// Number of stored tensor entries.
    pub fn tensor_len(&self) -> usize {
        self.qaa.len() + self.qac.len() + self.qcc.len()
    }

    /// Reduced right-hand side; cost independent of the full dimension.
    pub fn rhs(&self, a: &[f64], c: &[f64]) -> Vec<f64> {
        let mut out = self.k0.clone();
        self.rhs_into(a, c, &mut out);
        out
    }

    fn rhs_into(&self, a: &[f64], c: &[f64], out: &mut [f64]) {
        let (ra, rc) = (self.ra, self.rc);
        debug_assert_eq!(a.len(), ra);
        debug_assert_eq!(c.len(), rc);
        for (j, &aj) in a.iter().enumerate() {
            for (o, l) in out.iter_mut().zip(self.la.col_as_slice(j)) {
                *o += l * aj;
            }
        }
        for (k, &ck) in c.iter().enumerate() {
            for (o, l) in out.iter_mut().zip(self.lc.col_as_slice(k)) {
                *o += l * ck;
            }
        }
        // out += sum over pairs of (x_i y_j) * column; axpy form vectorizes
        let axpy = |col: &[f64], w: f64, out: &mut [f64]| {
            out.iter_mut().zip(col).for_each(|(o, q)| *o += w * q);
        };
        if ra == 0 {
            return;
        }
        let p = &self.packed;
        let mut cols = p.aa.chunks_exact(ra);
        for i in 0..ra {
            for j in i..ra {
                let col = cols.next().unwrap_or_default();
                let w = a[i] * a[j];
                if w != 0.0 {
                    axpy(col, w, out);
                }
            }
        }
        let mut cols = p.ac.chunks_exact(ra);
        for &ai in a {
            for &ck in c {
                let col = cols.next().unwrap_or_default();
                let w = ai * ck;
                if w != 0.0 {
                    axpy(col, w, out);
                }
            }
        }
        let mut cols = p.cc.chunks_exact(ra);
        for k in 0..rc {
            for l in k..rc {
                let col = cols.next().unwrap_or_default();
                let w = c[k] * c[l];
                if w != 0.0 {
                    axpy(col, w, out);
                }
            }
        }
    }

    /// Restricts to the given `a`-mode and `c`-mode indices (sub-blocks of every
    /// operator; the test space follows the `a` selection).
    pub fn select(&self, ai: &[usize], ci: &[usize]) -> Self {
        let (ra, rc) = (ai.len(), ci.len());
        let k0 = ai.iter().map(|&r| self.k0[r]).collect();
        let la = Mat::from_fn(ra, ra, |r, j| self.la[(ai[r], ai[j])]);
        let lc = Mat::from_fn(ra, rc, |r, k| self.lc[(ai[r], ci[k])]);
        let mut qaa = Vec::with_capacity(ra * ra * ra);
        for &i in ai {
            for &r in ai {
                qaa.extend(ai.iter().map(|&j| self.qaa(r, i, j)));
            }
        }
        let mut qac = Vec::with_capacity(ra * ra * rc);
        for &i in ai {
            for &r in ai {
                qac.extend(ci.iter().map(|&k| self.qac(r, i, k)));
            }
        }
        let mut qcc = Vec::with_capacity(rc * ra * rc);
        for &k in ci {
            for &r in ai {
                qcc.extend(ci.iter().map(|&l| self.qcc(r, k, l)));
            }
        }
        Self::assemble(ra, rc, k0, la, lc, qaa, qac, qcc)
    }

    /// Flat views of all tensors in storage order (for persistence).
    pub fn raw_parts(&self) -> [&[f64]; 3] {
        [&self.qaa, &self.qac, &self.qcc]
    }

    pub fn from_raw_parts(
        k0: Vec<f64>,
        la: Mat<f64>,
        lc: Mat<f64>,
        qaa: Vec<f64>,
        qac: Vec<f64>,
        qcc: Vec<f64>,
    ) -> Result<Self> {
        let (ra, rc) = (la.nrows(), lc.ncols());
        let ok = k0.len() == ra
            && la.ncols() == ra
            && lc.nrows() == ra
            && qaa.len() == ra * ra * ra
            && qac.len() == ra * ra * rc
            && qcc.len() == rc * ra * rc;
        if !ok {
            return Err(Error::Artifact(
                "inconsistent reduced operator shapes".into(),
            ));
        }
        Ok(Self::assemble(ra, rc, k0, la, lc, qaa, qac, qcc))
    }
}

/// Offline operators of the velocity-only model:
/// `da/dt = Phi_homᵀ F(Phi_hom a + F_inhom c, Phi_bc c)`.
#[derive(Debug, Clone)]
pub struct RomOperators {
    pub system: QuadraticSystem,
    pub phi_hom: Mat<f64>,
    pub f_inhom: Mat<f64>,
    pub phi_bc: Mat<f64>,
    /// `F_inhomᵀ Omega F_inhom` (boundary part of the kinetic energy).
    pub inhom_gram: Mat<f64>,
    /// `Phi_homᵀ Omega F_inhom`, zero up to round-off.
    pub cross_gram: Mat<f64>,
}

impl RomOperators {
    pub fn build(
        ops: &Operators,
        pod: &PodBasis,
        lift: &LiftingOperator,
        bc: &BcReduction,
    ) -> Result<Self> {
        let system = QuadraticSystem::build(ops, &pod.phi, &lift.f_inhom, &bc.phi)?;
        let inhom_gram = gram_weighted(&lift.f_inhom, &ops.omega, &lift.f_inhom);
        let cross_gram = gram_weighted(&pod.phi, &ops.omega, &lift.f_inhom);
        Ok(Self {
            system,
            phi_hom: pod.phi.clone(),
            f_inhom: lift.f_inhom.clone(),
            phi_bc: bc.phi.clone(),
            inhom_gram,
            cross_gram,
        })
    }

    pub fn r_hom(&self) -> usize {
        self.system.ra
    }

    pub fn r_bc(&self) -> usize {
        self.system.rc
    }

    pub fn rhs(&self, a: &[f64], c: &[f64]) -> Vec<f64> {
        self.system.rhs(a, c)
    }

    /// Leading `r_hom` homogeneous and `r_bc` boundary modes.
    pub fn truncate(&self, r_hom: usize, r_bc: usize) -> Self {
        let r_hom = r_hom.min(self.r_hom());
        let r_bc = r_bc.min(self.r_bc());
        let ai: Vec<usize> = (0..r_hom).collect();
        let ci: Vec<usize> = (0..r_bc).collect();
        let sub = |m: &Mat<f64>, r: usize, c: usize| Mat::from_fn(r, c, |i, j| m[(i, j)]);
        let n = self.phi_hom.nrows();
        let nb = self.phi_bc.nrows();
        Self {
            system: self.system.select(&ai, &ci),
            phi_hom: sub(&self.phi_hom, n, r_hom),
            f_inhom: sub(&self.f_inhom, n, r_bc),
            phi_bc: sub(&self.phi_bc, nb, r_bc),
            inhom_gram: sub(&self.inhom_gram, r_bc, r_bc),
            cross_gram: sub(&self.cross_gram, r_hom, r_bc),
        }
    }

    /// Largest entry of `Phi_homᵀ Omega F_inhom`.
    pub fn orthogonality_defect(&self) -> f64 {
        (0..self.cross_gram.ncols())
            .map(|j| max_abs(self.cross_gram.col_as_slice(j)))
            .fold(0.0, f64::max)
    }
}
