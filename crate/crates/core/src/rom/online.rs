use faer::Mat;

use super::offline::RomOperators;
use super::vp::VpRomOperators;
use crate::boundary::{BcReduction, TimeGrid};
use crate::error::{Error, Result};
use crate::fom::{fom_rhs_parts, RK4_B};
use crate::mesh::Operators;
use crate::numerics::{dense_lu, dot, matvec, matvec_t};

/// Velocity-only coefficients at every step.
#[derive(Debug, Clone)]
pub struct RomTrajectory {
    pub time: TimeGrid,
    /// `R_hom x (steps + 1)`
    pub a: Mat<f64>,
}

impl RomTrajectory {
    pub fn coeffs(&self, j: usize) -> &[f64] {
        self.a.col_as_slice(j)
    }

    /// `V_r = Phi_hom a + F_inhom c(t_j)`
    pub fn velocity(&self, rom: &RomOperators, bc: &BcReduction, j: usize) -> Vec<f64> {
        let mut v = matvec(&rom.phi_hom, self.coeffs(j));
        let l = matvec(&rom.f_inhom, &bc.coeffs(2 * j)[..rom.r_bc()]);
        v.iter_mut().zip(&l).for_each(|(x, y)| *x += y);
        v
    }
}

/// Velocity-pressure coefficients at every step.
#[derive(Debug, Clone)]
pub struct VpTrajectory {
    pub time: TimeGrid,
    /// `R_V x (steps + 1)`
    pub a: Mat<f64>,
    /// Reduced pressure at the start of every step (`R_p x (steps + 1)`).
    pub b: Mat<f64>,
}

impl VpTrajectory {
    pub fn velocity(&self, vp: &VpRomOperators, j: usize) -> Vec<f64> {
        matvec(&vp.phi, self.a.col_as_slice(j))
    }
}

/// `a_hom(0) = Phi_homᵀ Omega V(0)`
pub fn vo_initial(phi_hom: &Mat<f64>, omega: &[f64], v0: &[f64]) -> Vec<f64> {
    let wv: Vec<f64> = v0.iter().zip(omega).map(|(a, b)| a * b).collect();
    matvec_t(phi_hom, &wv)
}

/// Closest coefficients to `v0` in the Omega-norm subject to the projected mass
/// equation at the initial time.
pub fn vp_initial(vp: &VpRomOperators, omega: &[f64], v0: &[f64], c0: &[f64]) -> Result<Vec<f64>> {
    let wv: Vec<f64> = v0.iter().zip(omega).map(|(a, b)| a * b).collect();
    let abar = matvec_t(&vp.phi, &wv);
    let b = &vp.div_r;
    if b.nrows() == 0 {
        return Ok(abar);
    }
    let bbt = b * b.transpose();
    let lu = dense_lu(&bbt, 1e14)?;
    let mut viol = matvec(b, &abar);
    let target = matvec(&vp.bc_r, c0);
    viol.iter_mut().zip(&target).for_each(|(x, t)| *x -= t);
    let lam = lu.solve(&viol);
    let corr = matvec_t(b, &lam);
    Ok(abar.iter().zip(&corr).map(|(x, y)| x - y).collect())
}

fn rk4<F>(time: TimeGrid, a0: &[f64], mut rhs: F) -> Result<Mat<f64>>
where
    F: FnMut(&[f64], usize) -> Vec<f64>,
{
    let r = a0.len();
    let dt = time.dt;
    let mut out = Mat::zeros(r, time.steps + 1);
    out.col_as_slice_mut(0).copy_from_slice(a0);
    let mut a = a0.to_vec();
    let mut stage = vec![0.0; r];
    for n in 0..time.steps {
        // half-step table indices of the four stages
        let k1 = rhs(&a, 2 * n);
        stage
            .iter_mut()
            .enumerate()
            .for_each(|(i, s)| *s = a[i] + 0.5 * dt * k1[i]);
        let k2 = rhs(&stage, 2 * n + 1);
        stage
            .iter_mut()
            .enumerate()
            .for_each(|(i, s)| *s = a[i] + 0.5 * dt * k2[i]);
        let k3 = rhs(&stage, 2 * n + 1);
        stage
            .iter_mut()
            .enumerate()
            .for_each(|(i, s)| *s = a[i] + dt * k3[i]);
        let k4 = rhs(&stage, 2 * n + 2);
        for i in 0..r {
            a[i] +=
                dt * (RK4_B[0] * k1[i] + RK4_B[1] * k2[i] + RK4_B[2] * k3[i] + RK4_B[3] * k4[i]);
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { step: n + 1 });
        }
        out.col_as_slice_mut(n + 1).copy_from_slice(&a);
    }
    Ok(out)
}

fn check_tables(bc: &BcReduction, time: TimeGrid) -> Result<()> {
    let same = (bc.time.t0 - time.t0).abs() <= 1e-12 * time.dt
        && (bc.time.dt - time.dt).abs() <= 1e-12 * time.dt
        && bc.time.steps >= time.steps;
    if same {
        Ok(())
    } else {
        Err(Error::TimeGrid(format!(
            "boundary tables cover {:?}, integration needs {:?}",
            bc.time, time
        )))
    }
}

/// RK4 on the velocity-only model.
pub fn rom_integrate(
    rom: &RomOperators,
    bc: &BcReduction,
    a0: &[f64],
    time: TimeGrid,
) -> Result<RomTrajectory> {
    check_tables(bc, time)?;
    if a0.len() != rom.r_hom() || bc.r_bc() < rom.r_bc() {
        return Err(Error::Dimension {
            context: "velocity-only initial coefficients",
            expected: rom.r_hom(),
            got: a0.len(),
        });
    }
    let rc = rom.r_bc();
    let a = rk4(time, a0, |a, k| rom.rhs(a, &bc.coeffs(k)[..rc]))?;
    Ok(RomTrajectory { time, a })
}

/// RK4 on the velocity-pressure model; the reduced pressure is solved at every stage.
pub fn vp_rom_integrate(
    vp: &VpRomOperators,
    bc: &BcReduction,
    a0: &[f64],
    time: TimeGrid,
) -> Result<VpTrajectory> {
    check_tables(bc, time)?;
    if a0.len() != vp.r_v() {
        return Err(Error::Dimension {
            context: "velocity-pressure initial coefficients",
            expected: vp.r_v(),
            got: a0.len(),
        });
    }
    let rc = vp.r_bc();
    let r = vp.r_v();
    let dt = time.dt;
    let mut a_out = Mat::zeros(r, time.steps + 1);
    let mut b = Mat::zeros(vp.r_p(), time.steps + 1);
    let mut a = a0.to_vec();
    let mut stage = a.clone();
    let mut acc = vec![0.0; r];
    // same stage-wise projection as the full model: each stage value satisfies
    // the reduced constraint at its own time
    let sub = [0.5, 0.5, 1.0];
    let table = [0, 1, 1, 2];
    for n in 0..=time.steps {
        a_out.col_as_slice_mut(n).copy_from_slice(&a);
        let (_, bn) = vp.rhs(&a, &bc.coeffs(2 * n)[..rc], &bc.coeff_rates(2 * n)[..rc]);
        b.col_as_slice_mut(n).copy_from_slice(&bn);
        if n == time.steps {
            break;
        }
        stage.copy_from_slice(&a);
        acc.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..4 {
            let f = vp.system.rhs(&stage, &bc.coeffs(2 * n + table[s])[..rc]);
            acc.iter_mut()
                .zip(&f)
                .for_each(|(x, fi)| *x += RK4_B[s] * fi);
            if s < 3 {
                let h = sub[s] * dt;
                stage
                    .iter_mut()
                    .zip(&a)
                    .zip(&f)
                    .for_each(|((st, ai), fi)| *st = ai + h * fi);
                let pred = stage.clone();
                vp.project(&mut stage, &bc.coeffs(2 * n + table[s + 1])[..rc]);
                acc.iter_mut()
                    .zip(stage.iter().zip(&pred))
                    .for_each(|(x, (st, p))| *x += RK4_B[s] * (st - p) / h);
            }
        }
        a.iter_mut().zip(&acc).for_each(|(x, d)| *x += dt * d);
        vp.project(&mut a, &bc.coeffs(2 * n + 2)[..rc]);
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { step: n + 1 });
        }
    }
    Ok(VpTrajectory { time, a: a_out, b })
}

/// Pressure of a reduced state: solves `Lbar p = -F_M dy + M Omega^-1 F(V, y)`.
pub fn recover_pressure(ops: &Operators, v: &[f64], ybc: &[f64], dybc: &[f64]) -> Result<Vec<f64>> {
    Ok(fom_rhs_parts(ops, v, ybc, dybc)?.1)
}

/// Reduced kinetic energy and the homogeneous/inhomogeneous cross term.
#[derive(Debug, Clone)]
pub struct EnergySeries {
    /// `1/2 |a|^2 + 1/2 cᵀ (F_inhomᵀ Omega F_inhom) c`
    pub k: Vec<f64>,
    /// `aᵀ Phi_homᵀ Omega F_inhom c`
    pub cross: Vec<f64>,
}

impl EnergySeries {
    pub fn compute(rom: &RomOperators, bc: &BcReduction, traj: &RomTrajectory) -> Self {
        let rc = rom.r_bc();
        let mut k = Vec::with_capacity(traj.a.ncols());
        let mut cross = Vec::with_capacity(traj.a.ncols());
        for j in 0..traj.a.ncols() {
            let a = traj.coeffs(j);
            let c = &bc.coeffs(2 * j)[..rc];
            let gc = matvec(&rom.inhom_gram, c);
            k.push(0.5 * dot(a, a) + 0.5 * dot(c, &gc));
            cross.push(dot(a, &matvec(&rom.cross_gram, c)));
        }
        Self { k, cross }
    }
}
