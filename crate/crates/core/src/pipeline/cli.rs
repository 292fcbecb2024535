use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::config::{parse_modes, SimConfig, Testcase};
use super::stages::{Pipeline, Stage};
use crate::error::{Error, Result};

/// Environment variable with the thread count for offline assembly and dense kernels.
pub const THREADS_ENV: &str = "NSROM_THREADS";

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "nsrom",
    version,
    about = "Staged full-order / reduced-order Navier-Stokes pipeline"
)]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
    /// Flat key = value config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run directory (defaults to the config's output_dir)
    #[arg(long, global = true)]
    pub stage_dir: Option<PathBuf>,
    /// Comma-separated sweep of mode counts
    #[arg(long, global = true)]
    pub modes: Option<String>,
    /// varying-angle, moving-mode or custom
    #[arg(long, global = true)]
    pub testcase: Option<String>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Verb {
    /// Full-order run, stores every step
    Fom,
    /// Subtract the exact lifting from the snapshots
    Homogenize,
    /// Velocity and boundary POD bases
    Pod,
    /// Velocity-only reduced operators
    Offline,
    /// Velocity-only reduced runs for every R
    Online,
    /// Velocity-pressure operators and runs for every R
    VpOnline,
    /// Metrics, spectra and timings
    Compare,
    /// Every stage in order
    All,
}

impl Cli {
    /// Config file, then `--testcase`, then `--modes`.
    pub fn resolve_config(&self) -> Result<SimConfig> {
        let mut cfg = match &self.config {
            Some(p) => SimConfig::load(p)?,
            None => SimConfig::defaults(Testcase::VaryingAngle),
        };
        if let Some(tc) = &self.testcase {
            cfg.set("testcase", tc)?;
        }
        if let Some(m) = &self.modes {
            cfg.modes = parse_modes(m)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Applies the thread-count variable to the dense kernels; unset means sequential.
pub fn configure_threads() -> Result<()> {
    let par = match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| {
                Error::Config(format!(
                    "{THREADS_ENV} must be a positive integer, got '{v}'"
                ))
            })?;
            if n > 1 {
                faer::Par::rayon(n)
            } else {
                faer::Par::Seq
            }
        }
        Err(_) => faer::Par::Seq,
    };
    faer::set_global_parallelism(par);
    Ok(())
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else if matches!(e, Error::Config(_)) {
        EXIT_USAGE
    } else {
        EXIT_OTHER
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    configure_threads()?;
    let cfg = cli.resolve_config()?;
    let dir = cli
        .stage_dir
        .clone()
        .unwrap_or_else(|| cfg.output_dir.clone());
    let mut p = Pipeline::new(cfg, &dir)?;
    let stage = match cli.verb {
        Verb::Fom => Stage::Fom,
        Verb::Homogenize => Stage::Homogenize,
        Verb::Pod => Stage::Pod,
        Verb::Offline => Stage::Offline,
        Verb::Online => Stage::Online,
        Verb::VpOnline => Stage::VpOnline,
        Verb::Compare => Stage::Compare,
        Verb::All => {
            let rows = p.run_all()?;
            for r in rows {
                println!(
                    "r={} velocity_error={:.3e} mass_violation={:.3e} energy_error={:.3e} equivalence={}",
                    r.r,
                    r.velocity_error,
                    r.mass_violation,
                    r.energy_error,
                    r.equivalence_max.map_or("n/a".into(), |x| format!("{x:.3e}"))
                );
            }
            return Ok(());
        }
    };
    let out = p.run_stage(stage)?;
    for a in &out.artifacts {
        println!("{}", a.display());
    }
    log::info!("{} finished in {:.2} s", stage.name(), out.seconds);
    Ok(())
}

/// Parses `std::env::args`, runs, and returns the process exit code.
pub fn main_with_args() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "nsrom",
            "pod",
            "--modes",
            "3,6",
            "--testcase",
            "moving-mode",
        ])
        .unwrap();
        let cfg = cli.resolve_config().unwrap();
        assert_eq!(cfg.modes, vec![3, 6]);
        assert_eq!(cfg.testcase, Testcase::MovingMode);
        assert_eq!(cfg.t_end, 20.0);
    }

    #[test]
    fn invalid_testcase_is_a_usage_error() {
        let cli = Cli::try_parse_from(["nsrom", "all", "--testcase", "cylinder"]).unwrap();
        let e = cli.resolve_config().unwrap_err();
        assert_eq!(exit_code(&e), EXIT_USAGE);
        assert_eq!(exit_code(&Error::Singular { pivot: 0 }), EXIT_NUMERICAL);
        assert_ne!(EXIT_USAGE, EXIT_NUMERICAL);
    }
}
