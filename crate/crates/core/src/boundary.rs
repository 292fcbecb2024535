//! Inflow boundary traces `y_bc(t)`, their time derivatives, and the POD
//! compression of the trace history into `Phi_bc` plus coefficient tables.

use std::f64::consts::PI;
use std::path::Path;

use faer::Mat;

use crate::error::{Error, Result};
use crate::mesh::{Side, StaggeredGrid};
use crate::numerics::{mat_from_cols, matvec, matvec_t, thin_svd, RANK_TOL};

/// Time-parameterized boundary data.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryModel {
    /// Unit-magnitude inflow with angle `(pi/6) sin(y - t/2)` on the left side.
    VaryingAngle,
    /// Parabolic inflow profile sweeping from the bottom (at `t_start`) to the
    /// top (at `t_end`) of the left side; zero outside that window.
    MovingMode { t_start: f64, t_end: f64 },
    /// Time-independent trace.
    Constant(Vec<f64>),
    /// Tabulated traces, linear in time between rows; derivatives by central
    /// differences with step `delta`.
    Table {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
        delta: f64,
    },
}

impl BoundaryModel {
    /// Constant trace with `u` on every normal-u entry and `v` on every v entry.
    pub fn uniform(grid: &StaggeredGrid, u: f64, v: f64) -> Self {
        Self::Constant(
            grid.bc_entries()
                .iter()
                .map(|e| if e.component == 0 { u } else { v })
                .collect(),
        )
    }

    /// Reads a CSV with a header row and columns `t, y_0, ..., y_{n-1}`.
    pub fn from_csv(path: &Path, n_bc: usize, delta: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let nums: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let nums =
                nums.map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
            if nums.len() != n_bc + 1 {
                return Err(Error::Dimension {
                    context: "boundary table row",
                    expected: n_bc + 1,
                    got: nums.len(),
                });
            }
            times.push(nums[0]);
            values.push(nums[1..].to_vec());
        }
        if times.len() < 2 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!(
                "{}: need at least two rows with increasing times",
                path.display()
            )));
        }
        Ok(Self::Table {
            times,
            values,
            delta,
        })
    }

    pub fn eval(&self, grid: &StaggeredGrid, t: f64) -> Vec<f64> {
        match self {
            Self::VaryingAngle => per_entry(grid, |c, y| {
                let a = PI / 6.0 * (y - 0.5 * t).sin();
                if c == 0 {
                    a.cos()
                } else {
                    a.sin()
                }
            }),
            Self::MovingMode { t_start, t_end } => {
                let (lo, hi) = grid.y_range;
                per_entry(grid, |c, y| {
                    if c != 0 || t < *t_start || t > *t_end {
                        return 0.0;
                    }
                    let z = y + (t - t_end) / (t_end - t_start) * (hi - lo);
                    if (lo..=hi).contains(&z) {
                        0.1 * (z - lo) * (hi - z)
                    } else {
                        0.0
                    }
                })
            }
            Self::Constant(v) => v.clone(),
            Self::Table { times, values, .. } => interpolate(times, values, t),
        }
    }

    pub fn deriv(&self, grid: &StaggeredGrid, t: f64) -> Vec<f64> {
        match self {
            Self::VaryingAngle => per_entry(grid, |c, y| {
                let a = PI / 6.0 * (y - 0.5 * t).sin();
                let da = -PI / 12.0 * (y - 0.5 * t).cos();
                if c == 0 {
                    -a.sin() * da
                } else {
                    a.cos() * da
                }
            }),
            Self::MovingMode { t_start, t_end } => {
                let (lo, hi) = grid.y_range;
                let speed = (hi - lo) / (t_end - t_start);
                per_entry(grid, |c, y| {
                    if c != 0 || t < *t_start || t > *t_end {
                        return 0.0;
                    }
                    let z = y + (t - t_end) * speed;
                    if (lo..=hi).contains(&z) {
                        0.1 * (hi + lo - 2.0 * z) * speed
                    } else {
                        0.0
                    }
                })
            }
            Self::Constant(v) => vec![0.0; v.len()],
            Self::Table {
                times,
                values,
                delta,
            } => {
                let a = interpolate(times, values, t + delta);
                let b = interpolate(times, values, t - delta);
                a.iter()
                    .zip(&b)
                    .map(|(x, y)| (x - y) / (2.0 * delta))
                    .collect()
            }
        }
    }

    /// Snapshot matrix `[y_bc(t_0) ... y_bc(t_n)]`.
    pub fn snapshots(&self, grid: &StaggeredGrid, times: &[f64]) -> Mat<f64> {
        let cols: Vec<Vec<f64>> = times.iter().map(|&t| self.eval(grid, t)).collect();
        mat_from_cols(grid.n_bc(), &cols)
    }
}

/// Samples a function of (component, y) on the left-side entries; other sides get 0.
fn per_entry(grid: &StaggeredGrid, f: impl Fn(usize, f64) -> f64) -> Vec<f64> {
    grid.bc_entries()
        .iter()
        .map(|e| {
            if e.side == Side::Left {
                f(e.component, e.y)
            } else {
                0.0
            }
        })
        .collect()
}

fn interpolate(times: &[f64], values: &[Vec<f64>], t: f64) -> Vec<f64> {
    let n = times.len();
    if t <= times[0] {
        return values[0].clone();
    }
    if t >= times[n - 1] {
        return values[n - 1].clone();
    }
    let k = times.partition_point(|&s| s <= t) - 1;
    let w = (t - times[k]) / (times[k + 1] - times[k]);
    values[k]
        .iter()
        .zip(&values[k + 1])
        .map(|(a, b)| (1.0 - w) * a + w * b)
        .collect()
}

/// Uniform time grid `t_0 + k dt`, queried at half steps by the RK4 integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(t_end > t0) {
            return Err(Error::InvalidRange(format!(
                "time interval [{t0}, {t_end}] with {steps} steps"
            )));
        }
        Ok(Self {
            t0,
            dt: (t_end - t0) / steps as f64,
            steps,
        })
    }

    /// Time of step `n`.
    pub fn t(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    /// Time of half step `k` (`t_0 + k dt / 2`).
    pub fn half(&self, k: usize) -> f64 {
        self.t0 + k as f64 * 0.5 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.t(n)).collect()
    }
}

/// POD of the boundary trace history with precomputed coefficient tables.
#[derive(Debug, Clone)]
pub struct BcReduction {
    /// Orthonormal trace modes, `N_bc x R_bc`.
    pub phi: Mat<f64>,
    /// All singular values of the trace snapshot matrix.
    pub singular_values: Vec<f64>,
    pub time: TimeGrid,
    /// `Phi_bcᵀ y_bc` at every half step.
    a: Vec<Vec<f64>>,
    /// `Phi_bcᵀ dy_bc/dt` at every half step.
    da: Vec<Vec<f64>>,
}

impl BcReduction {
    /// Builds `Phi_bc` from the step-time snapshots and fills the tables for every
    /// half-step time. Requests above the numerical rank are truncated with a warning.
    pub fn new(
        model: &BoundaryModel,
        grid: &StaggeredGrid,
        time: TimeGrid,
        r_bc: usize,
    ) -> Result<Self> {
        let x = model.snapshots(grid, &time.times());
        let svd = thin_svd(&x)?;
        let rank = svd.rank(RANK_TOL);
        let r = if r_bc > rank {
            log::warn!("requested {r_bc} boundary modes, numerical rank is {rank}; truncating");
            rank
        } else {
            r_bc
        };
        let phi = Mat::from_fn(x.nrows(), r, |i, j| svd.u[(i, j)]);
        Self::with_basis(model, grid, time, phi, svd.s)
    }

    /// Uses a given orthonormal basis instead of the POD one.
    pub fn with_basis(
        model: &BoundaryModel,
        grid: &StaggeredGrid,
        time: TimeGrid,
        phi: Mat<f64>,
        singular_values: Vec<f64>,
    ) -> Result<Self> {
        if phi.nrows() != grid.n_bc() {
            return Err(Error::Dimension {
                context: "boundary basis rows",
                expected: grid.n_bc(),
                got: phi.nrows(),
            });
        }
        let mut a = Vec::with_capacity(2 * time.steps + 1);
        let mut da = Vec::with_capacity(2 * time.steps + 1);
        for k in 0..=2 * time.steps {
            let t = time.half(k);
            a.push(matvec_t(&phi, &model.eval(grid, t)));
            da.push(matvec_t(&phi, &model.deriv(grid, t)));
        }
        Ok(Self {
            phi,
            singular_values,
            time,
            a,
            da,
        })
    }

    pub fn r_bc(&self) -> usize {
        self.phi.ncols()
    }

    /// Coefficients at half step `k`.
    pub fn coeffs(&self, k: usize) -> &[f64] {
        &self.a[k]
    }

    pub fn coeff_rates(&self, k: usize) -> &[f64] {
        &self.da[k]
    }

    /// `Phi_bc c`
    pub fn reconstruct(&self, c: &[f64]) -> Vec<f64> {
        matvec(&self.phi, c)
    }

    /// Keeps the leading `r` modes (tables are truncated, not recomputed).
    pub fn truncate(&self, r: usize) -> Self {
        let r = r.min(self.r_bc());
        Self {
            phi: Mat::from_fn(self.phi.nrows(), r, |i, j| self.phi[(i, j)]),
            singular_values: self.singular_values.clone(),
            time: self.time,
            a: self.a.iter().map(|v| v[..r].to_vec()).collect(),
            da: self.da.iter().map(|v| v[..r].to_vec()).collect(),
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BcSpec;

    fn paper_grid() -> StaggeredGrid {
        StaggeredGrid::new(
            200,
            80,
            (0.0, 10.0),
            (-2.0, 2.0),
            BcSpec::inflow_outflow(1e-2, 0.0),
        )
        .unwrap()
    }

    #[test]
    fn varying_angle_values() {
        let g = StaggeredGrid::new(
            4,
            4,
            (0.0, 1.0),
            (-PI / 2.0, PI / 2.0 + 1.0),
            BcSpec::inflow_outflow(0.01, 0.0),
        )
        .unwrap();
        let y = BoundaryModel::VaryingAngle.eval(&g, 0.0);
        for (e, val) in g.bc_entries().iter().zip(&y) {
            let a = PI / 6.0 * e.y.sin();
            let expect = if e.component == 0 { a.cos() } else { a.sin() };
            assert!((val - expect).abs() < 1e-15);
        }
        // v entry at y = pi/2 (face row 4) sits on the maximal angle
        let top = g
            .bc_entries()
            .iter()
            .position(|e| e.component == 1 && (e.y - PI / 2.0).abs() < 1e-12);
        if let Some(k) = top {
            assert!((y[k] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn varying_angle_has_unit_magnitude_on_matching_points() {
        let g = paper_grid();
        for t in [0.0, 1.3, 7.7] {
            let y = BoundaryModel::VaryingAngle.eval(&g, t);
            for (e, val) in g.bc_entries().iter().zip(&y) {
                let alpha = PI / 6.0 * (e.y - 0.5 * t).sin();
                let other = if e.component == 0 {
                    alpha.sin()
                } else {
                    alpha.cos()
                };
                assert!((val * val + other * other - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn moving_mode_window() {
        let g = paper_grid();
        let m = BoundaryModel::MovingMode {
            t_start: 0.0,
            t_end: 20.0,
        };
        let y0 = m.eval(&g, 0.0);
        assert!(y0.iter().all(|v| v.abs() < 1e-12));
        let y = m.eval(&g, 20.0);
        // u faces at y = +-0.025 bracket the peak 0.4
        let mid = g
            .bc_entries()
            .iter()
            .position(|e| e.component == 0 && (e.y - 0.025).abs() < 1e-9)
            .unwrap();
        assert!((y[mid] - 0.1 * 2.025 * 1.975).abs() < 1e-14);
        assert!(y
            .iter()
            .zip(g.bc_entries())
            .all(|(v, e)| e.component == 0 || *v == 0.0));
        assert!(m.eval(&g, 25.0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn derivatives_match_central_differences() {
        let g = paper_grid();
        let d = 1e-4;
        for (model, ts) in [
            (BoundaryModel::VaryingAngle, vec![0.3, 2.0, 11.0]),
            (
                BoundaryModel::MovingMode {
                    t_start: 0.0,
                    t_end: 20.0,
                },
                vec![3.3, 10.01, 17.2],
            ),
        ] {
            for t in ts {
                let dy = model.deriv(&g, t);
                let p = model.eval(&g, t + d);
                let m = model.eval(&g, t - d);
                let scale = dy.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
                for k in 0..dy.len() {
                    let fd = (p[k] - m[k]) / (2.0 * d);
                    assert!((fd - dy[k]).abs() <= 1e-6 * scale, "{model:?} t={t} k={k}");
                }
            }
        }
    }

    #[test]
    fn constant_trace_reduces_exactly() {
        let g = StaggeredGrid::new(
            6,
            5,
            (0.0, 1.0),
            (0.0, 1.0),
            BcSpec::inflow_outflow(0.01, 0.0),
        )
        .unwrap();
        let model = BoundaryModel::uniform(&g, 1.0, 0.2);
        let red = BcReduction::new(&model, &g, TimeGrid::new(0.0, 1.0, 10).unwrap(), 3).unwrap();
        assert_eq!(red.r_bc(), 1);
        let y = model.eval(&g, 0.5);
        let rec = red.reconstruct(red.coeffs(5));
        assert!(y.iter().zip(&rec).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}
