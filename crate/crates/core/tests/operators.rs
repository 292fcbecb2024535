mod common;

use common::*;
use nalgebra::DMatrix;
use nsrom::mesh::{BcSpec, Operators, Side, SideKind, Slot, StaggeredGrid};
use proptest::prelude::*;

/// Face values of the whole grid as plain 2D arrays, filled from the velocity
/// and boundary vectors.
struct Fields<'a> {
    g: &'a StaggeredGrid,
    u: Vec<Vec<f64>>, // [i][j], i in 0..=nx, j in 0..ny
    v: Vec<Vec<f64>>, // [i][j], i in 0..nx, j in 0..=ny
    y: &'a [f64],
}

impl<'a> Fields<'a> {
    fn new(g: &'a StaggeredGrid, vel: &[f64], y: &'a [f64]) -> Self {
        let read = |s: Slot| match s {
            Slot::Vel(k) => vel[k],
            Slot::Bc(k) => y[k],
        };
        let u = (0..=g.nx)
            .map(|i| (0..g.ny).map(|j| read(g.u_slot(i, j))).collect())
            .collect();
        let v = (0..g.nx)
            .map(|i| (0..=g.ny).map(|j| read(g.v_slot(i, j))).collect())
            .collect();
        Self { g, u, v, y }
    }

    fn wall(&self, side: Side, component: usize, index: usize) -> f64 {
        let k = self
            .g
            .bc_entries()
            .iter()
            .position(|e| e.side == side && e.component == component && e.index == index)
            .expect("wall entry");
        self.y[k]
    }

    /// u at face column `i`, row `j` including one ghost row on each side.
    fn u_at(&self, i: usize, j: isize) -> f64 {
        let ny = self.g.ny as isize;
        if (0..ny).contains(&j) {
            return self.u[i][j as usize];
        }
        let (side, inner, wrap) = if j < 0 {
            (Side::Bottom, 0, self.g.ny - 1)
        } else {
            (Side::Top, self.g.ny - 1, 0)
        };
        match self.g.bc.kind(side) {
            SideKind::Dirichlet => 2.0 * self.wall(side, 0, i) - self.u[i][inner],
            SideKind::Outflow => self.u[i][inner],
            SideKind::Periodic => self.u[i][wrap],
        }
    }

    fn v_at(&self, i: isize, j: usize) -> f64 {
        let nx = self.g.nx as isize;
        if (0..nx).contains(&i) {
            return self.v[i as usize][j];
        }
        let (side, inner, wrap) = if i < 0 {
            (Side::Left, 0, self.g.nx - 1)
        } else {
            (Side::Right, self.g.nx - 1, 0)
        };
        match self.g.bc.kind(side) {
            SideKind::Dirichlet => 2.0 * self.wall(side, 1, j) - self.v[inner][j],
            SideKind::Outflow => self.v[inner][j],
            SideKind::Periodic => self.v[wrap][j],
        }
    }
}

/// Cells whose x-range (or y-range) overlaps the control volume of face `i`.
fn cells_under(i: usize, n: usize, periodic: bool) -> Vec<usize> {
    match i {
        0 if periodic => vec![n - 1, 0],
        0 => vec![0],
        _ if i == n => vec![n - 1],
        _ => vec![i - 1, i],
    }
}

/// Momentum right-hand side computed face by face from 2D arrays.
fn loop_oracle(o: &Operators, vel: &[f64], y: &[f64]) -> Vec<f64> {
    let g = &o.grid;
    let f = Fields::new(g, vel, y);
    let (nx, ny, dx, dy, nu, p_inf) = (g.nx, g.ny, g.dx, g.dy, g.bc.nu, g.bc.p_inf);
    let (px, py) = (g.bc.periodic_x(), g.bc.periodic_y());
    let mut out = vec![0.0; o.n_vel()];
    for i in 0..=nx {
        for j in 0..ny {
            let Slot::Vel(k) = g.u_slot(i, j) else {
                continue;
            };
            if i == nx && px {
                continue;
            }
            let jj = j as isize;
            let uc = f.u[i][j];
            let west_idx = if i == 0 { nx - 1 } else { i.wrapping_sub(1) };
            let has_east = i < nx;
            let has_west = i > 0 || px;
            // convection: east and west
            let mut c = 0.0;
            if has_east {
                let m = 0.5 * (uc + f.u[i + 1][j]);
                c -= dy * m * m;
            } else {
                c -= dy * uc * uc;
            }
            if has_west {
                let m = 0.5 * (uc + f.u[west_idx][j]);
                c += dy * m * m;
            } else {
                c += dy * uc * uc;
            }
            let cells = cells_under(i, nx, px);
            let vn: f64 = cells
                .iter()
                .map(|&ci| 0.5 * dx * f.v_at(ci as isize, j + 1))
                .sum();
            let vs: f64 = cells
                .iter()
                .map(|&ci| 0.5 * dx * f.v_at(ci as isize, j))
                .sum();
            c -= vn * 0.5 * (uc + f.u_at(i, jj + 1));
            c += vs * 0.5 * (uc + f.u_at(i, jj - 1));
            // diffusion
            let mut d = 0.0;
            if has_east {
                d += nu * dy / dx * (f.u[i + 1][j] - uc);
            } else {
                d -= p_inf * dy;
            }
            if has_west {
                d += nu * dy / dx * (f.u[west_idx][j] - uc);
            } else {
                d += p_inf * dy;
            }
            let len = if (i == 0 || i == nx) && !px {
                0.5 * dx
            } else {
                dx
            };
            d += nu * len / dy * (f.u_at(i, jj + 1) - uc);
            d += nu * len / dy * (f.u_at(i, jj - 1) - uc);
            out[k] = c + d + o.f[k];
        }
    }
    for i in 0..nx {
        for j in 0..=ny {
            let Slot::Vel(k) = g.v_slot(i, j) else {
                continue;
            };
            if j == ny && py {
                continue;
            }
            let ii = i as isize;
            let vc = f.v[i][j];
            let south_idx = if j == 0 { ny - 1 } else { j.wrapping_sub(1) };
            let has_north = j < ny;
            let has_south = j > 0 || py;
            let mut c = 0.0;
            if has_north {
                let m = 0.5 * (vc + f.v[i][j + 1]);
                c -= dx * m * m;
            } else {
                c -= dx * vc * vc;
            }
            if has_south {
                let m = 0.5 * (vc + f.v[i][south_idx]);
                c += dx * m * m;
            } else {
                c += dx * vc * vc;
            }
            let cells = cells_under(j, ny, py);
            let ue: f64 = cells
                .iter()
                .map(|&cj| 0.5 * dy * f.u_at(i + 1, cj as isize))
                .sum();
            let uw: f64 = cells
                .iter()
                .map(|&cj| 0.5 * dy * f.u_at(i, cj as isize))
                .sum();
            c -= ue * 0.5 * (vc + f.v_at(ii + 1, j));
            c += uw * 0.5 * (vc + f.v_at(ii - 1, j));
            let mut d = 0.0;
            if has_north {
                d += nu * dx / dy * (f.v[i][j + 1] - vc);
            } else {
                d -= p_inf * dx;
            }
            if has_south {
                d += nu * dx / dy * (f.v[i][south_idx] - vc);
            } else {
                d += p_inf * dx;
            }
            let len = if (j == 0 || j == ny) && !py {
                0.5 * dy
            } else {
                dy
            };
            d += nu * len / dx * (f.v_at(ii + 1, j) - vc);
            d += nu * len / dx * (f.v_at(ii - 1, j) - vc);
            out[k] = c + d + o.f[k];
        }
    }
    out
}

fn check_against_loops(nx: usize, ny: usize, bc: BcSpec, seed: u64) {
    let o = ops(nx, ny, bc);
    let mut r = rng(seed);
    let vel = random_vec(&mut r, o.n_vel());
    let y = random_vec(&mut r, o.n_bc());
    let fast = o.eval_fcd(&vel, &y).unwrap();
    let slow = loop_oracle(&o, &vel, &y);
    let scale = max_abs(&slow).max(1.0);
    assert!(
        max_diff(&fast, &slow) <= 1e-13 * scale,
        "mismatch {}",
        max_diff(&fast, &slow)
    );
}

#[test]
fn momentum_rhs_matches_face_loops_inflow_outflow() {
    check_against_loops(6, 5, BcSpec::inflow_outflow(0.03, 0.7), 1);
    check_against_loops(9, 4, BcSpec::inflow_outflow(0.0, 0.0), 2);
}

#[test]
fn momentum_rhs_matches_face_loops_closed_box() {
    check_against_loops(5, 4, BcSpec::closed_box(0.05), 3);
}

#[test]
fn momentum_rhs_matches_face_loops_periodic() {
    check_against_loops(4, 4, BcSpec::periodic(0.02), 4);
    check_against_loops(5, 3, BcSpec::periodic(0.0), 5);
}

#[test]
fn mixed_boundaries_match_face_loops() {
    let bc = BcSpec {
        left: SideKind::Periodic,
        right: SideKind::Periodic,
        bottom: SideKind::Dirichlet,
        top: SideKind::Outflow,
        nu: 0.01,
        p_inf: -0.3,
    };
    check_against_loops(5, 6, bc, 6);
}

#[test]
fn gradient_is_negative_divergence_transpose() {
    for bc in [
        BcSpec::inflow_outflow(0.01, 0.0),
        BcSpec::closed_box(0.01),
        BcSpec::periodic(0.01),
    ] {
        let o = ops(7, 5, bc);
        let g = dense(&o.g());
        let m = dense(&o.m);
        assert_eq!((&g + m.transpose()).abs().max(), 0.0);
        let p: Vec<f64> = (0..o.n_p()).map(|k| (k as f64 * 0.37).sin()).collect();
        let gp = o.apply_g(&p);
        let gd = &g * dvec(&p);
        assert_eq!(max_diff(&gp, gd.as_slice()), 0.0);
    }
}

#[test]
fn periodic_convection_is_skew_for_divergence_free_transport() {
    let o = ops(4, 4, BcSpec::periodic(0.0));
    let mut r = rng(11);
    let u = project_div_free(&o, &random_vec(&mut r, o.n_vel()));
    assert!(max_abs(&o.m.mul_vec(&u)) < 1e-12);
    let y: Vec<f64> = vec![];
    let eu = o.extend(&u, &y);
    for _ in 0..5 {
        let w = random_vec(&mut r, o.n_vel());
        let z = random_vec(&mut r, o.n_vel());
        let ew = o.extend(&w, &y);
        let ez = o.extend(&z, &y);
        let cw = o.convection(&eu, &ew);
        let cz = o.convection(&eu, &ez);
        let a: f64 = z.iter().zip(&cw).map(|(p, q)| p * q).sum();
        let b: f64 = w.iter().zip(&cz).map(|(p, q)| p * q).sum();
        assert!((a + b).abs() < 1e-13, "{a} vs {b}");
    }
    let cu = o.convection(&eu, &eu);
    let e: f64 = u.iter().zip(&cu).map(|(p, q)| p * q).sum();
    assert!(e.abs() < 1e-14);
}

#[test]
fn diffusion_is_symmetric_nonpositive_with_homogeneous_walls() {
    for bc in [BcSpec::periodic(0.1), BcSpec::closed_box(0.1)] {
        let o = ops(5, 4, bc);
        let d = dense(&o.d);
        assert!((&d - d.transpose()).abs().max() < 1e-14);
        let eig = d.symmetric_eigenvalues();
        assert!(eig.max() < 1e-12);
    }
}

#[test]
fn uniform_flow_is_steady_and_mass_consistent() {
    let o = ops(6, 4, BcSpec::periodic(0.05));
    let g = &o.grid;
    let vel: Vec<f64> = g
        .unknown_faces()
        .iter()
        .map(|&(c, _, _)| if c == 0 { 1.3 } else { -0.4 })
        .collect();
    let f = o.eval_fcd(&vel, &[]).unwrap();
    assert!(max_abs(&f) < 1e-14);

    let o = ops(6, 4, BcSpec::inflow_outflow(0.05, 0.0));
    let g = &o.grid;
    let vel: Vec<f64> = g
        .unknown_faces()
        .iter()
        .map(|&(c, _, _)| if c == 0 { 1.0 } else { 0.0 })
        .collect();
    let y: Vec<f64> = g
        .bc_entries()
        .iter()
        .map(|e| if e.component == 0 { 1.0 } else { 0.0 })
        .collect();
    let defect: Vec<f64> =
        o.m.mul_vec(&vel)
            .iter()
            .zip(o.y_m(&y))
            .map(|(a, b)| a - b)
            .collect();
    assert!(max_abs(&defect) < 1e-14);
}

/// Minimum-norm solution through the SVD pseudo-inverse.
fn pinv_solve(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(&dvec(b), 1e-10 * svd.singular_values.max())
        .unwrap();
    x.as_slice().to_vec()
}

#[test]
fn closed_box_pressure_matches_pseudo_inverse_up_to_constant() {
    let o = ops(5, 4, BcSpec::closed_box(0.01));
    assert!(o.poisson.is_bordered());
    let mut r = rng(21);
    let mut rhs = random_vec(&mut r, o.n_p());
    let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
    rhs.iter_mut().for_each(|x| *x -= mean);
    let p = o.poisson.solve(&rhs).unwrap();
    let q = pinv_solve(&dense(&o.l), &rhs);
    let shift: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a - b).collect();
    let s0 = shift[0];
    assert!(
        shift.iter().all(|s| (s - s0).abs() < 1e-10),
        "not a constant shift"
    );
}

#[test]
fn inflow_outflow_poisson_matches_dense_solve() {
    let o = ops(6, 5, BcSpec::inflow_outflow(0.01, 0.0));
    assert!(!o.poisson.is_bordered());
    let mut r = rng(22);
    let rhs = random_vec(&mut r, o.n_p());
    let p = o.poisson.solve(&rhs).unwrap();
    let q = dense(&o.l).lu().solve(&dvec(&rhs)).unwrap();
    assert!(max_diff(&p, q.as_slice()) < 1e-10 * max_abs(q.as_slice()).max(1.0));
}

#[test]
fn lifting_satisfies_mass_and_is_orthogonal_to_divergence_free_fields() {
    let o = ops(8, 5, BcSpec::inflow_outflow(0.01, 0.0));
    let mut r = rng(23);
    let y = random_vec(&mut r, o.n_bc());
    let ym = o.y_m(&y);
    let lift = o.lift_rhs(&ym).unwrap();
    let res: Vec<f64> =
        o.m.mul_vec(&lift)
            .iter()
            .zip(&ym)
            .map(|(a, b)| a - b)
            .collect();
    assert!(max_abs(&res) < 1e-11);
    for _ in 0..3 {
        let w = project_div_free(&o, &random_vec(&mut r, o.n_vel()));
        let ip: f64 = w
            .iter()
            .zip(&lift)
            .zip(&o.omega)
            .map(|((a, b), c)| a * b * c)
            .sum();
        assert!(ip.abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn convection_is_bilinear(seed in 0u64..1000, s in -2.0f64..2.0) {
        let o = ops(5, 4, BcSpec::inflow_outflow(0.0, 0.0));
        let mut r = rng(seed);
        let n = o.ext.len();
        let a = random_vec(&mut r, n);
        let b = random_vec(&mut r, n);
        let c = random_vec(&mut r, n);
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
        let lhs = o.convection(&ab, &c);
        let r1 = o.convection(&a, &c);
        let r2 = o.convection(&b, &c);
        let rhs: Vec<f64> = r1.iter().zip(&r2).map(|(x, y)| x + s * y).collect();
        prop_assert!(max_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn divergence_of_gradient_is_poisson_operator(seed in 0u64..1000) {
        let o = ops(6, 4, BcSpec::inflow_outflow(0.01, 0.0));
        let mut r = rng(seed);
        let p = random_vec(&mut r, o.n_p());
        let gp = o.apply_g(&p);
        let scaled: Vec<f64> = gp.iter().zip(&o.omega).map(|(a, w)| a / w).collect();
        let lhs = o.m.mul_vec(&scaled);
        let rhs = o.l.mul_vec(&p);
        prop_assert!(max_diff(&lhs, &rhs) < 1e-10 * max_abs(&rhs).max(1.0));
    }
}
