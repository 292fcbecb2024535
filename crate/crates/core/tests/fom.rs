mod common;

use common::*;
use nsrom::boundary::{BoundaryModel, TimeGrid};
use nsrom::fom::{
    fom_integrate, fom_integrate_from, fom_rhs_parts, initial_condition, kinetic_energy, FomOptions,
};
use nsrom::mesh::{BcSpec, ForcingSpec, Operators, StaggeredGrid};
use nsrom::Error;

fn inflow_ops(nx: usize, ny: usize, nu: f64) -> Operators {
    let g = StaggeredGrid::new(
        nx,
        ny,
        (0.0, 4.0),
        (-1.0, 1.0),
        BcSpec::inflow_outflow(nu, 0.0),
    )
    .unwrap();
    Operators::assemble(g, ForcingSpec::None).unwrap()
}

/// Smooth divergence-free swirl in the unit box, sampled at face positions and
/// projected once more to remove discretization residue.
fn swirl(o: &Operators) -> Vec<f64> {
    let g = &o.grid;
    let pi = std::f64::consts::PI;
    let v: Vec<f64> = g
        .unknown_faces()
        .iter()
        .map(|&(c, i, j)| {
            if c == 0 {
                let (x, y) = g.u_pos(i, j);
                (pi * x).sin().powi(2) * (2.0 * pi * y).sin()
            } else {
                let (x, y) = g.v_pos(i, j);
                -(2.0 * pi * x).sin() * (pi * y).sin().powi(2)
            }
        })
        .collect();
    project_div_free(o, &v)
}

#[test]
fn rest_state_is_preserved_exactly() {
    let o = ops(6, 6, BcSpec::closed_box(0.01));
    let model = BoundaryModel::Constant(vec![0.0; o.n_bc()]);
    let time = TimeGrid::new(0.0, 1.0, 25).unwrap();
    let s = fom_integrate(&o, &model, time, FomOptions::default()).unwrap();
    for j in 0..=time.steps {
        assert!(s.column(j).iter().all(|x| *x == 0.0));
    }
    assert!(s
        .pressure
        .unwrap()
        .col_as_slice(7)
        .iter()
        .all(|x| *x == 0.0));
}

#[test]
fn rhs_matches_dense_solve() {
    let o = inflow_ops(7, 4, 0.02);
    let mut r = rng(5);
    let v = random_vec(&mut r, o.n_vel());
    let y = random_vec(&mut r, o.n_bc());
    let dy = random_vec(&mut r, o.n_bc());
    let (dv, p, f) = fom_rhs_parts(&o, &v, &y, &dy).unwrap();

    let m = dense(&o.m);
    let fm = dense(&o.fm);
    let om_inv = nalgebra::DMatrix::from_diagonal(&dvec(&o.omega).map(|w| 1.0 / w));
    let g = -m.transpose();
    let l = &m * &om_inv * &g;
    let rhs = &m * &om_inv * dvec(&f) - &fm * dvec(&dy);
    let p_ref = l.lu().solve(&rhs).unwrap();
    let dv_ref = &om_inv * (dvec(&f) - &g * &p_ref);
    assert!(max_diff(&p, p_ref.as_slice()) < 1e-10 * max_abs(p_ref.as_slice()));
    assert!(max_diff(&dv, dv_ref.as_slice()) < 1e-10 * max_abs(dv_ref.as_slice()));
    // the update keeps d/dt (M V - F_M y) = 0
    let mdv = &m * dvec(&dv) - &fm * dvec(&dy);
    assert!(mdv.amax() < 1e-10 * max_abs(&dv));
}

#[test]
fn rk4_self_convergence_is_fourth_order() {
    let o = inflow_ops(12, 6, 0.02);
    let model = BoundaryModel::VaryingAngle;
    let v0 = initial_condition(&o, &model, 0.0).unwrap().v;
    let end = 1.0;
    let run = |steps| {
        let time = TimeGrid::new(0.0, end, steps).unwrap();
        let s = fom_integrate_from(
            &o,
            &model,
            v0.clone(),
            time,
            FomOptions {
                store_pressure: false,
                energy_residual: false,
            },
        )
        .unwrap();
        s.column(steps).to_vec()
    };
    let reference = run(160);
    let e1 = max_diff(&run(10), &reference);
    let e2 = max_diff(&run(20), &reference);
    let ratio = e1 / e2;
    assert!(
        (10.0..=22.0).contains(&ratio),
        "ratio {ratio} ({e1:e} / {e2:e})"
    );
}

#[test]
fn inflow_run_keeps_mass_constraint() {
    let o = inflow_ops(16, 8, 0.01);
    let time = TimeGrid::new(0.0, 2.0, 40).unwrap();
    let s = fom_integrate(
        &o,
        &BoundaryModel::VaryingAngle,
        time,
        FomOptions::default(),
    )
    .unwrap();
    assert!(
        s.divergence_defect.iter().all(|d| *d < 1e-10),
        "{:?}",
        s.divergence_defect
    );
    assert_eq!(s.velocity.ncols(), 41);
    let k: Vec<f64> = (0..=40)
        .map(|j| kinetic_energy(&o.omega, s.column(j)))
        .collect();
    assert_eq!(k, s.kinetic_energy);
}

#[test]
fn kinked_inflow_keeps_mass_constraint() {
    // the moving profile switches on and off at each boundary point
    let o = inflow_ops(16, 8, 0.01);
    let model = BoundaryModel::MovingMode {
        t_start: 0.0,
        t_end: 2.0,
    };
    let time = TimeGrid::new(0.0, 2.0, 30).unwrap();
    let s = fom_integrate(
        &o,
        &model,
        time,
        FomOptions {
            store_pressure: false,
            energy_residual: false,
        },
    )
    .unwrap();
    assert!(
        s.divergence_defect.iter().all(|d| *d < 1e-12),
        "{:?}",
        s.divergence_defect
    );
}

#[test]
fn energy_balance_residual_is_high_order_in_dt() {
    let o = inflow_ops(12, 6, 0.01);
    let model = BoundaryModel::VaryingAngle;
    let total = |steps| {
        let time = TimeGrid::new(0.0, 1.0, steps).unwrap();
        let s = fom_integrate(
            &o,
            &model,
            time,
            FomOptions {
                store_pressure: false,
                energy_residual: true,
            },
        )
        .unwrap();
        s.energy_residual.iter().map(|r| r.abs()).sum::<f64>()
    };
    let (a, b) = (total(20), total(40));
    assert!(a / b >= 8.0, "{a:e} / {b:e}");
}

#[test]
fn inviscid_closed_box_conserves_energy() {
    let o = ops(12, 12, BcSpec::closed_box(0.0));
    let v0 = swirl(&o);
    let model = BoundaryModel::Constant(vec![0.0; o.n_bc()]);
    let time = TimeGrid::new(0.0, 0.5, 200).unwrap();
    let s = fom_integrate_from(
        &o,
        &model,
        v0,
        time,
        FomOptions {
            store_pressure: false,
            energy_residual: false,
        },
    )
    .unwrap();
    let k0 = s.kinetic_energy[0];
    let drift = s
        .kinetic_energy
        .iter()
        .map(|k| (k - k0).abs())
        .fold(0.0, f64::max)
        / k0;
    assert!(drift < 1e-6, "drift {drift:e}");
}

#[test]
fn blow_up_reports_the_step() {
    let o = ops(6, 6, BcSpec::periodic(0.0));
    let mut r = rng(9);
    let v0: Vec<f64> = project_div_free(&o, &random_vec(&mut r, o.n_vel()))
        .iter()
        .map(|x| 1e3 * x)
        .collect();
    let time = TimeGrid::new(0.0, 10.0, 10).unwrap();
    let e = fom_integrate_from(
        &o,
        &BoundaryModel::Constant(vec![]),
        v0,
        time,
        FomOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(e, Error::NonFinite { .. }), "{e:?}");
}
