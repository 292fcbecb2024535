//! Full-order model: RK4 with a pressure projection per stage.

use faer::Mat;

use crate::boundary::{BoundaryModel, TimeGrid};
use crate::error::{Error, Result};
use crate::mesh::Operators;
use crate::numerics::{dot, norm2};

/// Classical RK4 tableau (explicit, nodes 0, 1/2, 1/2, 1).
pub const RK4_B: [f64; 4] = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];

#[derive(Debug, Clone)]
pub struct FomState {
    pub t: f64,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
}

/// Velocity (and optionally pressure) history at every step.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub time: TimeGrid,
    /// `N_V x (steps + 1)`
    pub velocity: Mat<f64>,
    pub pressure: Option<Mat<f64>>,
    /// `||M V - y_M(t)||_2` after every step.
    pub divergence_defect: Vec<f64>,
    /// `K = 1/2 Vᵀ Omega V` at every step.
    pub kinetic_energy: Vec<f64>,
    /// Per-step energy-balance residual of the RK4 update (empty unless requested).
    pub energy_residual: Vec<f64>,
}

impl SnapshotSet {
    pub fn column(&self, j: usize) -> &[f64] {
        self.velocity.col_as_slice(j)
    }
}

pub fn kinetic_energy(omega: &[f64], v: &[f64]) -> f64 {
    0.5 * v.iter().zip(omega).map(|(x, w)| w * x * x).sum::<f64>()
}

/// `Omega^-1 G Lbar^-1 F_M y_bc`: the lifting of a boundary vector.
pub fn exact_lifting(ops: &Operators, ybc: &[f64]) -> Result<Vec<f64>> {
    ops.lift_rhs(&ops.y_m(ybc))
}

/// Right-hand side and pressure at one state: returns `(dV/dt, p, F)`.
pub fn fom_rhs_parts(
    ops: &Operators,
    v: &[f64],
    ybc: &[f64],
    dybc: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let f = ops.eval_fcd(v, ybc)?;
    let p = instantaneous_pressure(ops, &f, dybc)?;
    let gp = ops.apply_g(&p);
    let dv = f
        .iter()
        .zip(&gp)
        .zip(&ops.omega)
        .map(|((a, b), w)| (a - b) / w)
        .collect();
    Ok((dv, p, f))
}

/// Solves `Lbar p = M Omega^-1 F - F_M dy`.
fn instantaneous_pressure(ops: &Operators, f: &[f64], dybc: &[f64]) -> Result<Vec<f64>> {
    let finv: Vec<f64> = f.iter().zip(&ops.omega).map(|(a, w)| a / w).collect();
    let mut rhs = ops.m.mul_vec(&finv);
    ops.fm.mul_vec_acc(dybc, -1.0, &mut rhs);
    ops.poisson.solve(&rhs)
}

/// `dV/dt` and pressure at time `t`.
pub fn fom_rhs(
    ops: &Operators,
    model: &BoundaryModel,
    v: &[f64],
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (dv, p, _) = fom_rhs_parts(
        ops,
        v,
        &model.eval(&ops.grid, t),
        &model.deriv(&ops.grid, t),
    )?;
    Ok((dv, p))
}

/// `V_0` as the lifting of the exact trace at `t0`, with its consistent pressure.
pub fn initial_condition(ops: &Operators, model: &BoundaryModel, t0: f64) -> Result<FomState> {
    let v = exact_lifting(ops, &model.eval(&ops.grid, t0))?;
    let (_, p) = fom_rhs(ops, model, &v, t0)?;
    Ok(FomState { t: t0, v, p })
}

#[derive(Debug, Clone, Copy)]
pub struct FomOptions {
    pub store_pressure: bool,
    /// Evaluates the instantaneous pressure at every stage for the energy
    /// balance; costs one extra Poisson solve per stage.
    pub energy_residual: bool,
}

impl Default for FomOptions {
    fn default() -> Self {
        Self {
            store_pressure: true,
            energy_residual: true,
        }
    }
}

/// Sub-diagonal of the RK4 Butcher matrix.
const RK4_A: [f64; 3] = [0.5, 0.5, 1.0];
const RK4_C: [f64; 4] = [0.0, 0.5, 0.5, 1.0];

/// Omega-orthogonal projection of `w` onto `{M V = y_M(t)}`; returns the
/// potential `psi` with `w <- w - Omega^-1 G psi`.
fn project(ops: &Operators, w: &mut [f64], ybc: &[f64]) -> Result<Vec<f64>> {
    let mut r = ops.m.mul_vec(w);
    ops.fm.mul_vec_acc(ybc, -1.0, &mut r);
    let psi = ops.poisson.solve(&r)?;
    let gp = ops.apply_g(&psi);
    w.iter_mut()
        .zip(&gp)
        .zip(&ops.omega)
        .for_each(|((x, g), o)| *x -= g / o);
    Ok(psi)
}

/// A solve that failed on non-finite data means the run has blown up.
fn blown(e: Error, step: usize) -> Error {
    match e {
        Error::Residual { residual, .. } if !residual.is_finite() => Error::NonFinite { step },
        e => e,
    }
}

/// Integrates from `v0` over the time grid, storing every step.
///
/// Each RK4 stage value (and the new step) is projected onto the constraint at
/// its own time, so `M V_n = y_M(t_n)` holds to solver precision even when the
/// boundary data has kinks. The stage pressures are those projections.
pub fn fom_integrate_from(
    ops: &Operators,
    model: &BoundaryModel,
    v0: Vec<f64>,
    time: TimeGrid,
    opts: FomOptions,
) -> Result<SnapshotSet> {
    let n_v = ops.n_vel();
    if v0.len() != n_v {
        return Err(Error::Dimension {
            context: "initial velocity",
            expected: n_v,
            got: v0.len(),
        });
    }
    let grid = &ops.grid;
    let dt = time.dt;
    let mut velocity = Mat::zeros(n_v, time.steps + 1);
    let mut pressure = opts
        .store_pressure
        .then(|| Mat::zeros(ops.n_p(), time.steps + 1));
    let mut defect = Vec::with_capacity(time.steps + 1);
    let mut energy = Vec::with_capacity(time.steps + 1);
    let mut residual = Vec::with_capacity(time.steps);

    let defect_at = |v: &[f64], t: f64| {
        let mut r = ops.m.mul_vec(v);
        ops.fm.mul_vec_acc(&model.eval(grid, t), -1.0, &mut r);
        norm2(&r)
    };

    let mut v = v0;
    velocity.col_as_slice_mut(0).copy_from_slice(&v);
    defect.push(defect_at(&v, time.t(0)));
    energy.push(kinetic_energy(&ops.omega, &v));

    let mut stage = vec![0.0; n_v];
    let mut acc = vec![0.0; n_v];
    for n in 0..time.steps {
        let t = time.t(n);
        stage.copy_from_slice(&v);
        acc.iter_mut().for_each(|x| *x = 0.0);
        let mut power = 0.0;
        for s in 0..4 {
            let ts = t + RK4_C[s] * dt;
            let ybc = model.eval(grid, ts);
            let f = ops.eval_fcd(&stage, &ybc).map_err(|e| blown(e, n + 1))?;
            if f.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { step: n + 1 });
            }
            let want_p = opts.energy_residual || (s == 0 && opts.store_pressure);
            if want_p {
                let p = instantaneous_pressure(ops, &f, &model.deriv(grid, ts))
                    .map_err(|e| blown(e, n + 1))?;
                if s == 0 {
                    if let Some(pm) = pressure.as_mut() {
                        pm.col_as_slice_mut(n).copy_from_slice(&p);
                    }
                }
                // dK/dt = Vᵀ F + (M V)ᵀ p
                power += RK4_B[s] * (dot(&stage, &f) + dot(&ops.m.mul_vec(&stage), &p));
            }
            for i in 0..n_v {
                acc[i] += RK4_B[s] * f[i] / ops.omega[i];
            }
            if s < 3 {
                let h = RK4_A[s] * dt;
                for i in 0..n_v {
                    stage[i] = v[i] + h * f[i] / ops.omega[i];
                }
                if stage.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite { step: n + 1 });
                }
                let pred = stage.clone();
                project(ops, &mut stage, &model.eval(grid, t + RK4_C[s + 1] * dt))
                    .map_err(|e| blown(e, n + 1))?;
                // the stage pressure gradient enters the final combination too
                for i in 0..n_v {
                    acc[i] += RK4_B[s] * (stage[i] - pred[i]) / h;
                }
            }
        }
        let e_old = kinetic_energy(&ops.omega, &v);
        for i in 0..n_v {
            v[i] += dt * acc[i];
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { step: n + 1 });
        }
        project(ops, &mut v, &model.eval(grid, t + dt)).map_err(|e| blown(e, n + 1))?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { step: n + 1 });
        }
        let e_new = kinetic_energy(&ops.omega, &v);
        if opts.energy_residual {
            residual.push(e_new - e_old - dt * power);
        }
        velocity.col_as_slice_mut(n + 1).copy_from_slice(&v);
        defect.push(defect_at(&v, time.t(n + 1)));
        energy.push(e_new);
    }
    if let Some(pm) = pressure.as_mut() {
        let (_, p) = fom_rhs(ops, model, &v, time.t(time.steps))?;
        pm.col_as_slice_mut(time.steps).copy_from_slice(&p);
    }
    let tol = defect
        .iter()
        .enumerate()
        .map(|(j, d)| d / divergence_tolerance(ops, model, time.t(j)))
        .fold(0.0_f64, f64::max);
    if tol > 1.0 {
        log::warn!("divergence defect exceeded tolerance by factor {tol:.2e}");
    }
    Ok(SnapshotSet {
        time,
        velocity,
        pressure,
        divergence_defect: defect,
        kinetic_energy: energy,
        energy_residual: residual,
    })
}

/// `1e-8 max(1, ||y_M(t)||)`
pub fn divergence_tolerance(ops: &Operators, model: &BoundaryModel, t: f64) -> f64 {
    1e-8 * norm2(&ops.y_m(&model.eval(&ops.grid, t))).max(1.0)
}

/// Starts from [`initial_condition`] and integrates.
pub fn fom_integrate(
    ops: &Operators,
    model: &BoundaryModel,
    time: TimeGrid,
    opts: FomOptions,
) -> Result<SnapshotSet> {
    let init = initial_condition(ops, model, time.t0)?;
    fom_integrate_from(ops, model, init.v, time, opts)
}
