//! Assembles the finite-volume operators on the reference channel and prints
//! their sizes plus a few structural checks.
//!
//! cargo run --release --example staggered_operators [nx ny]

use nsrom::mesh::{ActuatorDisk, BcSpec, ForcingSpec, Operators, StaggeredGrid};

fn main() -> nsrom::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let (nx, ny) = match args[..] {
        [a, b, ..] => (a, b),
        _ => (200, 80),
    };
    let grid = StaggeredGrid::new(
        nx,
        ny,
        (0.0, 10.0),
        (-2.0, 2.0),
        BcSpec::inflow_outflow(1e-2, 0.0),
    )?;
    let disk = ActuatorDisk {
        x: 2.0,
        y_center: 0.0,
        length: 1.0,
        force: 0.25,
    };
    let ops = Operators::assemble(grid, ForcingSpec::Actuator(disk))?;
    println!(
        "grid {nx}x{ny}: N_u + N_v = {}, N_p = {}, N_bc = {}",
        ops.n_vel(),
        ops.n_p(),
        ops.n_bc()
    );
    println!(
        "nnz: M {}, L {}, D {}",
        ops.m.nnz(),
        ops.l.nnz(),
        ops.d.nnz()
    );

    let g = ops.g();
    let gap = g.add(&ops.m.transpose()).max_abs();
    println!("max |G + M^T| = {gap:e}");
    println!("pressure system bordered: {}", ops.poisson.is_bordered());
    println!(
        "actuator: {} faces, total force {:.4}",
        ops.f.iter().filter(|f| **f != 0.0).count(),
        ops.f.iter().sum::<f64>()
    );

    // a uniform inflow is mass-consistent with a uniform interior field
    let y: Vec<f64> = ops
        .grid
        .bc_entries()
        .iter()
        .map(|e| if e.component == 0 { 1.0 } else { 0.0 })
        .collect();
    let v: Vec<f64> = ops
        .grid
        .unknown_faces()
        .iter()
        .map(|&(c, _, _)| if c == 0 { 1.0 } else { 0.0 })
        .collect();
    let mut r = ops.m.mul_vec(&v);
    ops.fm.mul_vec_acc(&y, -1.0, &mut r);
    println!(
        "uniform flow mass defect: {:e}",
        nsrom::numerics::max_abs(&r)
    );
    Ok(())
}
