//! Error metrics between full-order and reduced trajectories, spectra and
//! timing reports.

use std::fmt::Write as _;
use std::time::Duration;

use faer::Mat;

use crate::boundary::{BcReduction, BoundaryModel, TimeGrid};
use crate::error::{Error, Result};
use crate::fom::{fom_rhs_parts, kinetic_energy, RK4_B};
use crate::mesh::Operators;
use crate::numerics::{dot, norm2, weighted_norm};
use crate::rom::{RomOperators, RomTrajectory};

/// A named time series with the normalization used to produce it.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub name: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub normalization: f64,
}

impl MetricSeries {
    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, &v| {
            if v.is_nan() || m.is_nan() {
                f64::NAN
            } else {
                m.max(v)
            }
        })
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }

    /// CSV with header `t,<name>`.
    pub fn to_csv(&self) -> String {
        let mut s = format!("t,{}\n", self.name);
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(s, "{t:.17e},{v:.17e}");
        }
        s
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// `||V_h^j - V_r^j||_Omega / mean_j ||V_h^j||_Omega`
pub fn velocity_error(
    fom: &Mat<f64>,
    time: TimeGrid,
    omega: &[f64],
    rom_velocity: impl Fn(usize) -> Vec<f64>,
) -> Result<MetricSeries> {
    if fom.ncols() != time.steps + 1 {
        return Err(Error::TimeGrid(format!(
            "{} snapshots for {} steps",
            fom.ncols(),
            time.steps
        )));
    }
    let norms: Vec<f64> = (0..fom.ncols())
        .map(|j| weighted_norm(fom.col_as_slice(j), omega))
        .collect();
    let normalization = mean(&norms);
    let values = (0..fom.ncols())
        .map(|j| {
            let vr = rom_velocity(j);
            let diff: Vec<f64> = fom
                .col_as_slice(j)
                .iter()
                .zip(&vr)
                .map(|(a, b)| a - b)
                .collect();
            weighted_norm(&diff, omega) / normalization
        })
        .collect();
    Ok(MetricSeries {
        name: "relative_velocity_error".into(),
        times: time.times(),
        values,
        normalization,
    })
}

/// `||M V_r^j - F_M y_bc(t_j)||_2` against the exact trace.
pub fn mass_violation(
    ops: &Operators,
    model: &BoundaryModel,
    time: TimeGrid,
    rom_velocity: impl Fn(usize) -> Vec<f64>,
) -> MetricSeries {
    let values = (0..=time.steps)
        .map(|j| {
            let mut r = ops.m.mul_vec(&rom_velocity(j));
            ops.fm
                .mul_vec_acc(&model.eval(&ops.grid, time.t(j)), -1.0, &mut r);
            norm2(&r)
        })
        .collect();
    MetricSeries {
        name: "mass_violation".into(),
        times: time.times(),
        values,
        normalization: 1.0,
    }
}

/// `|K_h^j - K_r^j| / mean_j K_h^j`
pub fn energy_error(k_fom: &[f64], k_rom: &[f64], time: TimeGrid) -> Result<MetricSeries> {
    if k_fom.len() != k_rom.len() || k_fom.len() != time.steps + 1 {
        return Err(Error::TimeGrid("energy series lengths differ".into()));
    }
    let normalization = mean(k_fom);
    Ok(MetricSeries {
        name: "relative_kinetic_energy_error".into(),
        times: time.times(),
        values: k_fom
            .iter()
            .zip(k_rom)
            .map(|(a, b)| (a - b).abs() / normalization)
            .collect(),
        normalization,
    })
}

/// `||V_vo^j - V_vp^j||_Omega`
pub fn equivalence_error(
    omega: &[f64],
    time: TimeGrid,
    vo: impl Fn(usize) -> Vec<f64>,
    vp: impl Fn(usize) -> Vec<f64>,
) -> MetricSeries {
    let values = (0..=time.steps)
        .map(|j| {
            let a = vo(j);
            let b = vp(j);
            let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            weighted_norm(&d, omega)
        })
        .collect();
    MetricSeries {
        name: "rom_equivalence_error".into(),
        times: time.times(),
        values,
        normalization: 1.0,
    }
}

/// Singular values divided by the largest.
pub fn relative_spectrum(s: &[f64]) -> Vec<f64> {
    let s0 = s.first().copied().unwrap_or(1.0);
    if s0 == 0.0 {
        return vec![0.0; s.len()];
    }
    s.iter().map(|x| x / s0).collect()
}

/// Per-step kinetic-energy balance of the velocity-only model: the RK4 energy
/// change minus the stage quadrature of `V_rᵀ F(V_r, y) + y_Mᵀ p_r`, where `p_r`
/// is the recovered pressure at each stage.
pub fn rom_energy_residual(
    ops: &Operators,
    rom: &RomOperators,
    bc: &BcReduction,
    traj: &RomTrajectory,
) -> Result<Vec<f64>> {
    let dt = traj.time.dt;
    let rc = rom.r_bc();
    let energy_at = |a: &[f64], k: usize| -> Result<(f64, Vec<f64>)> {
        let c = &bc.coeffs(k)[..rc];
        let dc = &bc.coeff_rates(k)[..rc];
        let mut v = crate::numerics::matvec(&rom.phi_hom, a);
        let lift = crate::numerics::matvec(&rom.f_inhom, c);
        v.iter_mut().zip(&lift).for_each(|(x, y)| *x += y);
        let y = bc.reconstruct(c);
        let dy = bc.reconstruct(dc);
        let (_, p, f) = fom_rhs_parts(ops, &v, &y, &dy)?;
        let power = dot(&v, &f) + dot(&ops.y_m(&y), &p);
        Ok((power, rom.rhs(a, c)))
    };
    let mut out = Vec::with_capacity(traj.time.steps);
    for n in 0..traj.time.steps {
        let a0 = traj.coeffs(n);
        let (p1, k1) = energy_at(a0, 2 * n)?;
        let s2: Vec<f64> = a0.iter().zip(&k1).map(|(a, k)| a + 0.5 * dt * k).collect();
        let (p2, k2) = energy_at(&s2, 2 * n + 1)?;
        let s3: Vec<f64> = a0.iter().zip(&k2).map(|(a, k)| a + 0.5 * dt * k).collect();
        let (p3, k3) = energy_at(&s3, 2 * n + 1)?;
        let s4: Vec<f64> = a0.iter().zip(&k3).map(|(a, k)| a + dt * k).collect();
        let (p4, _) = energy_at(&s4, 2 * n + 2)?;
        let vel = |j: usize| traj.velocity(rom, bc, j);
        let dk = kinetic_energy(&ops.omega, &vel(n + 1)) - kinetic_energy(&ops.omega, &vel(n));
        let quad = RK4_B[0] * p1 + RK4_B[1] * p2 + RK4_B[2] * p3 + RK4_B[3] * p4;
        out.push(dk - dt * quad);
    }
    Ok(out)
}

/// Wall-clock measurements of one reduced model against the full-order run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingRow {
    pub r: usize,
    pub fom: Duration,
    pub offline: Duration,
    pub online: Duration,
}

impl TimingRow {
    pub fn speedup(&self) -> f64 {
        self.fom.as_secs_f64() / self.online.as_secs_f64().max(1e-12)
    }
}

/// Renders timing rows as machine-parsable `key=value` lines. Online time excludes
/// every factorization and tensor build, which count as offline work.
pub fn timing_report(rows: &[TimingRow]) -> String {
    let mut s = String::from("# online excludes factorizations and tensor assembly (offline)\n");
    for row in rows {
        let _ = writeln!(
            s,
            "r={} t_fom={:.6} t_offline={:.6} t_online={:.6} speedup={:.2}",
            row.r,
            row.fom.as_secs_f64(),
            row.offline.as_secs_f64(),
            row.online.as_secs_f64(),
            row.speedup()
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_trajectories_have_zero_error() {
        let time = TimeGrid::new(0.0, 1.0, 3).unwrap();
        let x = Mat::from_fn(4, 4, |i, j| (i + j) as f64 + 1.0);
        let omega = [1.0, 2.0, 0.5, 1.0];
        let e = velocity_error(&x, time, &omega, |j| x.col_as_slice(j).to_vec()).unwrap();
        assert!(e.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_rom_against_constant_norm_gives_one() {
        let time = TimeGrid::new(0.0, 1.0, 4).unwrap();
        // columns are rotations of the same vector: equal norms
        let x = Mat::from_fn(3, 5, |i, j| if (i + j) % 3 == 0 { 2.0 } else { 0.0 });
        let e = velocity_error(&x, time, &[1.0; 3], |_| vec![0.0; 3]).unwrap();
        assert!(e.values.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn time_grid_mismatch_is_rejected() {
        let time = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let x = Mat::<f64>::zeros(3, 3);
        assert!(matches!(
            velocity_error(&x, time, &[1.0; 3], |_| vec![0.0; 3]),
            Err(Error::TimeGrid(_))
        ));
    }

    #[test]
    fn report_has_one_line_per_row() {
        let rows = [TimingRow {
            r: 10,
            fom: Duration::from_secs(10),
            offline: Duration::from_secs(3),
            online: Duration::from_millis(50),
        }];
        let rep = timing_report(&rows);
        assert!(rep.contains("r=10") && rep.contains("speedup=200.00"));
    }
}
