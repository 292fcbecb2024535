//! Drives the staged pipeline programmatically on a small channel and prints the
//! sweep summary and the ledger.
//!
//! cargo run --release --example pipeline_sweep [run-dir]

use std::path::PathBuf;

use nsrom::pipeline::{Pipeline, SimConfig};

fn main() -> nsrom::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs/example-sweep"));
    let cfg = SimConfig::parse(
        "testcase = moving-mode\n\
         nx = 40\n\
         ny = 16\n\
         steps = 200\n\
         modes = 2, 5, 10, 20\n",
    )?;
    let mut p = Pipeline::new(cfg, &dir)?;
    let rows = p.run_all()?;
    println!("   R  R_bc  velocity err  mass viol.   energy err   equivalence");
    for r in rows {
        println!(
            "{:4}  {:4}  {:.3e}     {:.3e}    {:.3e}    {:.2e}",
            r.r,
            r.r_bc,
            r.velocity_error,
            r.mass_violation,
            r.energy_error,
            r.equivalence_max.unwrap_or(f64::NAN)
        );
    }
    println!("\nledger ({}):", dir.display());
    for e in p.ledger().entries() {
        println!(
            "  {:10} {:32} {}  {:.3} s",
            e.stage,
            e.artifact,
            &e.sha256[..12],
            e.seconds
        );
    }
    println!("\n{}", std::fs::read_to_string(dir.join("timing.txt"))?);
    Ok(())
}
