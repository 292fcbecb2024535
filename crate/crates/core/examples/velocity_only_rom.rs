//! Offline/online split of the velocity-only reduced model: snapshots,
//! homogenization, POD, tensors, then an R sweep against the full-order run.
//!
//! cargo run --release --example velocity_only_rom [nx ny steps]

use std::time::Instant;

use nsrom::boundary::BcReduction;
use nsrom::diagnostics::{energy_error, mass_violation, velocity_error};
use nsrom::fom::{fom_integrate, FomOptions};
use nsrom::lifting::{homogeneous_pod, homogenized_copy, LiftingOperator};
use nsrom::mesh::Operators;
use nsrom::pipeline::{SimConfig, Testcase};
use nsrom::rom::{rom_integrate, vo_initial, EnergySeries, RomOperators};

fn main() -> nsrom::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut cfg = SimConfig::defaults(Testcase::VaryingAngle);
    (cfg.nx, cfg.ny, cfg.steps) = match args[..] {
        [a, b, c, ..] => (a, b, c),
        _ => (60, 24, 400),
    };
    let ops = Operators::assemble(cfg.grid()?, cfg.forcing())?;
    let model = cfg.boundary_model(&ops.grid)?;
    let time = cfg.time()?;

    let start = Instant::now();
    let fom = fom_integrate(
        &ops,
        &model,
        time,
        FomOptions {
            store_pressure: false,
            energy_residual: false,
        },
    )?;
    let t_fom = start.elapsed().as_secs_f64();
    let hom = homogenized_copy(&fom, &ops, &model)?;
    let basis = homogeneous_pod(&hom, &ops, 40)?;
    drop(hom);
    let bc = BcReduction::new(&model, &ops.grid, time, 40)?;
    let lift = LiftingOperator::build(&ops, &bc)?;
    let start = Instant::now();
    let rom = RomOperators::build(&ops, &basis, &lift, &bc)?;
    println!(
        "FOM {t_fom:.2} s, offline {:.2} s, R_bc = {}",
        start.elapsed().as_secs_f64(),
        bc.r_bc()
    );

    println!("   R   velocity err   mass         energy err   online [s]   speedup");
    for r in [2, 5, 10, 20, 40] {
        let rom_r = rom.truncate(r, r);
        let bc_r = bc.truncate(rom_r.r_bc());
        let a0 = vo_initial(&rom_r.phi_hom, &ops.omega, fom.column(0));
        let start = Instant::now();
        let traj = rom_integrate(&rom_r, &bc_r, &a0, time)?;
        let t_on = start.elapsed().as_secs_f64();
        let vel = |j: usize| traj.velocity(&rom_r, &bc_r, j);
        let e = velocity_error(&fom.velocity, time, &ops.omega, vel)?;
        let m = mass_violation(&ops, &model, time, vel);
        let k = EnergySeries::compute(&rom_r, &bc_r, &traj);
        let ke = energy_error(&fom.kinetic_energy, &k.k, time)?;
        println!(
            "{r:4}   {:.3e}      {:.3e}    {:.3e}    {t_on:.4}       {:.0}x",
            e.max(),
            m.max(),
            ke.max(),
            t_fom / t_on
        );
    }
    Ok(())
}
