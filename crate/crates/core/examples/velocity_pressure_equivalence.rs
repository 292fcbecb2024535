//! Integrates the velocity-only and the velocity-pressure reduced models side by
//! side and reports how far apart their velocities drift.
//!
//! cargo run --release --example velocity_pressure_equivalence [testcase]

use nsrom::boundary::BcReduction;
use nsrom::diagnostics::equivalence_error;
use nsrom::fom::{fom_integrate, initial_condition, FomOptions};
use nsrom::lifting::{homogeneous_pod, homogenized_copy, LiftingOperator};
use nsrom::mesh::Operators;
use nsrom::pipeline::{SimConfig, Testcase};
use nsrom::rom::{
    rom_integrate, vo_initial, vp_initial, vp_rom_integrate, RomOperators, VpRomOperators,
};

fn main() -> nsrom::Result<()> {
    let tc: Testcase = std::env::args()
        .nth(1)
        .as_deref()
        .unwrap_or("moving-mode")
        .parse()?;
    let mut cfg = SimConfig::defaults(tc);
    (cfg.nx, cfg.ny, cfg.steps) = (50, 20, 400);
    let ops = Operators::assemble(cfg.grid()?, cfg.forcing())?;
    let model = cfg.boundary_model(&ops.grid)?;
    let time = cfg.time()?;
    let fom = fom_integrate(
        &ops,
        &model,
        time,
        FomOptions {
            store_pressure: false,
            energy_residual: false,
        },
    )?;
    let basis = homogeneous_pod(&homogenized_copy(&fom, &ops, &model)?, &ops, 20)?;
    let bc = BcReduction::new(&model, &ops.grid, time, 20)?;
    let lift = LiftingOperator::build(&ops, &bc)?;
    let vo = RomOperators::build(&ops, &basis, &lift, &bc)?;
    let vp = VpRomOperators::build(&ops, &basis, &lift, &bc)?;
    let c = &vp.checks;
    println!(
        "{}: |Phi^T Omega Phi - I| = {:.1e}, lifting outside span {:.1e}, rank B = {} of {}, cond L_r = {:.1e}",
        tc.name(),
        c.orthonormality,
        c.lifting_outside_span,
        c.rank_b,
        c.r_p,
        c.cond_lr
    );
    let v0 = initial_condition(&ops, &model, time.t0)?.v;
    for r in [2, 5, 10, 20] {
        let vo_r = vo.truncate(r, r);
        let vp_r = vp.truncate(r, r)?;
        let bc_r = bc.truncate(vo_r.r_bc());
        let a = rom_integrate(
            &vo_r,
            &bc_r,
            &vo_initial(&vo_r.phi_hom, &ops.omega, &v0),
            time,
        )?;
        let b = vp_rom_integrate(
            &vp_r,
            &bc_r,
            &vp_initial(&vp_r, &ops.omega, &v0, bc_r.coeffs(0))?,
            time,
        )?;
        let eq = equivalence_error(
            &ops.omega,
            time,
            |j| a.velocity(&vo_r, &bc_r, j),
            |j| b.velocity(&vp_r, j),
        );
        println!(
            "R = {r:2} (R_p = {:2}): max |V_vo - V_vp|_Omega = {:.2e}, mean {:.2e}",
            vp_r.r_p(),
            eq.max(),
            eq.mean()
        );
    }
    Ok(())
}
