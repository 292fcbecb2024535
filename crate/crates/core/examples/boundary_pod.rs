//! Compresses the inflow trace history of both testcases and reports how many
//! modes each needs.
//!
//! cargo run --release --example boundary_pod

use nsrom::boundary::BcReduction;
use nsrom::diagnostics::relative_spectrum;
use nsrom::pipeline::{SimConfig, Testcase};

fn main() -> nsrom::Result<()> {
    for tc in [Testcase::VaryingAngle, Testcase::MovingMode] {
        let cfg = SimConfig::defaults(tc);
        let grid = cfg.grid()?;
        let model = cfg.boundary_model(&grid)?;
        let time = cfg.time()?;
        let bc = BcReduction::new(&model, &grid, time, grid.n_bc())?;
        let rel = relative_spectrum(&bc.singular_values);
        println!(
            "{}: N_bc = {}, kept {} modes",
            tc.name(),
            grid.n_bc(),
            bc.r_bc()
        );
        for tol in [1e-2, 1e-4, 1e-8, 1e-10] {
            println!(
                "  above {tol:e}: {}",
                rel.iter().filter(|s| **s > tol).count()
            );
        }
        // reconstruction error of the reduced trace at a mid-run half step
        let k = time.steps;
        let y = model.eval(&grid, time.half(k));
        let back = bc.reconstruct(bc.coeffs(k));
        let err = y
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        println!(
            "  trace reconstruction error at t = {:.3}: {err:.2e}",
            time.half(k)
        );
    }
    Ok(())
}
