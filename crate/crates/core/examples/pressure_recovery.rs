//! Recovers the pressure of a reduced trajectory from its velocity and compares
//! it with the full-order pressure history.
//!
//! cargo run --release --example pressure_recovery

use nsrom::boundary::BcReduction;
use nsrom::fom::{fom_integrate, FomOptions};
use nsrom::lifting::{homogeneous_pod, homogenized_copy, LiftingOperator};
use nsrom::mesh::Operators;
use nsrom::numerics::norm2;
use nsrom::pipeline::{SimConfig, Testcase};
use nsrom::rom::{recover_pressure, rom_integrate, vo_initial, RomOperators};

fn main() -> nsrom::Result<()> {
    let mut cfg = SimConfig::defaults(Testcase::VaryingAngle);
    (cfg.nx, cfg.ny, cfg.steps) = (40, 16, 200);
    let ops = Operators::assemble(cfg.grid()?, cfg.forcing())?;
    let model = cfg.boundary_model(&ops.grid)?;
    let time = cfg.time()?;
    let fom = fom_integrate(&ops, &model, time, FomOptions::default())?;
    let pf = fom.pressure.as_ref().expect("pressure stored");
    let basis = homogeneous_pod(&homogenized_copy(&fom, &ops, &model)?, &ops, usize::MAX)?;
    let bc = BcReduction::new(&model, &ops.grid, time, ops.n_bc())?;
    let lift = LiftingOperator::build(&ops, &bc)?;
    let rom = RomOperators::build(&ops, &basis, &lift, &bc)?;
    println!(
        "numerical rank {} (homogeneous), {} (boundary)",
        basis.r(),
        bc.r_bc()
    );

    for r in [5, 10, 20, basis.r()] {
        let rom_r = rom.truncate(r, bc.r_bc());
        let a0 = vo_initial(&rom_r.phi_hom, &ops.omega, fom.column(0));
        let traj = rom_integrate(&rom_r, &bc, &a0, time)?;
        let mut worst = 0.0_f64;
        for j in (0..=time.steps).step_by(5) {
            let t = time.t(j);
            let v = traj.velocity(&rom_r, &bc, j);
            let p = recover_pressure(
                &ops,
                &v,
                &model.eval(&ops.grid, t),
                &model.deriv(&ops.grid, t),
            )?;
            let d: Vec<f64> = p
                .iter()
                .zip(pf.col_as_slice(j))
                .map(|(a, b)| a - b)
                .collect();
            worst = worst.max(norm2(&d) / norm2(pf.col_as_slice(j)));
        }
        println!("R = {r:3}: max relative pressure error {worst:.2e}");
    }
    Ok(())
}
