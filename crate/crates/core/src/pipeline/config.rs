use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::boundary::{BoundaryModel, TimeGrid};
use crate::error::{Error, Result};
use crate::mesh::{ActuatorDisk, BcSpec, ForcingSpec, StaggeredGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Testcase {
    VaryingAngle,
    MovingMode,
    Custom,
}

impl FromStr for Testcase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "varying-angle" => Ok(Self::VaryingAngle),
            "moving-mode" => Ok(Self::MovingMode),
            "custom" => Ok(Self::Custom),
            other => Err(Error::Config(format!(
                "unknown testcase '{other}' (expected varying-angle, moving-mode or custom)"
            ))),
        }
    }
}

impl Testcase {
    pub fn name(self) -> &'static str {
        match self {
            Self::VaryingAngle => "varying-angle",
            Self::MovingMode => "moving-mode",
            Self::Custom => "custom",
        }
    }
}

/// Simulation configuration, read from flat `key = value` files.
///
/// Keys: `testcase`, `nx`, `ny`, `x_min`, `x_max`, `y_min`, `y_max`, `nu`, `p_inf`,
/// `force`, `disk_x`, `disk_y`, `disk_length`, `t_end`, `steps`, `modes`
/// (comma-separated sweep, `R_hom = R_bc = R`), `r_bc` (optional override),
/// `mode_t_start`, `mode_t_end`, `table` (CSV for the custom testcase), `seed`,
/// `output_dir`. Lines starting with `#` are comments.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub testcase: Testcase,
    pub nx: usize,
    pub ny: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nu: f64,
    pub p_inf: f64,
    pub force: f64,
    pub disk_x: f64,
    pub disk_y: f64,
    pub disk_length: f64,
    pub t_end: f64,
    pub steps: usize,
    pub modes: Vec<usize>,
    pub r_bc: Option<usize>,
    pub mode_t_start: f64,
    pub mode_t_end: f64,
    pub table: Option<PathBuf>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl SimConfig {
    /// Defaults for a testcase: 200x80 on [0,10]x[-2,2], nu = 0.01, force 0.25 on a
    /// unit disk at x = 2, 800 steps up to 4 pi (varying angle) or 20.
    pub fn defaults(testcase: Testcase) -> Self {
        Self {
            testcase,
            nx: 200,
            ny: 80,
            x_range: (0.0, 10.0),
            y_range: (-2.0, 2.0),
            nu: 1e-2,
            p_inf: 0.0,
            force: 0.25,
            disk_x: 2.0,
            disk_y: 0.0,
            disk_length: 1.0,
            t_end: match testcase {
                Testcase::VaryingAngle => 4.0 * std::f64::consts::PI,
                _ => 20.0,
            },
            steps: 800,
            modes: vec![2, 5, 10, 20, 40, 80],
            r_bc: None,
            mode_t_start: 0.0,
            mode_t_end: 20.0,
            table: None,
            seed: 0,
            output_dir: PathBuf::from(format!("runs/{}", testcase.name())),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let testcase = pairs
            .iter()
            .find(|(k, _)| k == "testcase")
            .map(|(_, v)| v.parse())
            .transpose()?
            .unwrap_or(Testcase::VaryingAngle);
        let mut cfg = Self::defaults(testcase);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets one key. `testcase` also resets `t_end` to that testcase's default.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("invalid value '{v}' for {key}")))
        }
        match key {
            "testcase" => {
                let tc: Testcase = value.parse()?;
                if tc != self.testcase {
                    let d = Self::defaults(tc);
                    self.t_end = d.t_end;
                    self.output_dir = d.output_dir;
                    self.testcase = tc;
                }
            }
            "nx" => self.nx = num(key, value)?,
            "ny" => self.ny = num(key, value)?,
            "x_min" => self.x_range.0 = num(key, value)?,
            "x_max" => self.x_range.1 = num(key, value)?,
            "y_min" => self.y_range.0 = num(key, value)?,
            "y_max" => self.y_range.1 = num(key, value)?,
            "nu" => self.nu = num(key, value)?,
            "p_inf" => self.p_inf = num(key, value)?,
            "force" => self.force = num(key, value)?,
            "disk_x" => self.disk_x = num(key, value)?,
            "disk_y" => self.disk_y = num(key, value)?,
            "disk_length" => self.disk_length = num(key, value)?,
            "t_end" => self.t_end = num(key, value)?,
            "steps" => self.steps = num(key, value)?,
            "modes" => self.modes = parse_modes(value)?,
            "r_bc" => self.r_bc = Some(num(key, value)?),
            "mode_t_start" => self.mode_t_start = num(key, value)?,
            "mode_t_end" => self.mode_t_end = num(key, value)?,
            "table" => self.table = Some(PathBuf::from(value)),
            "seed" => self.seed = num(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::Config("nx and ny must be at least 2".into()));
        }
        if self.steps == 0 || !(self.t_end > 0.0) {
            return Err(Error::Config("need steps >= 1 and t_end > 0".into()));
        }
        if self.modes.is_empty() || self.modes.contains(&0) {
            return Err(Error::Config(
                "modes must be a non-empty list of positive counts".into(),
            ));
        }
        if self.testcase == Testcase::MovingMode && !(self.mode_t_end > self.mode_t_start) {
            return Err(Error::Config("mode_t_end must exceed mode_t_start".into()));
        }
        if self.testcase == Testcase::Custom && self.table.is_none() {
            return Err(Error::Config("custom testcase needs a 'table' CSV".into()));
        }
        Ok(())
    }

    pub fn r_max(&self) -> usize {
        self.modes.iter().copied().max().unwrap_or(1)
    }

    pub fn r_bc_for(&self, r: usize) -> usize {
        self.r_bc.unwrap_or(r)
    }

    pub fn grid(&self) -> Result<StaggeredGrid> {
        StaggeredGrid::new(
            self.nx,
            self.ny,
            self.x_range,
            self.y_range,
            BcSpec::inflow_outflow(self.nu, self.p_inf),
        )
    }

    pub fn forcing(&self) -> ForcingSpec {
        if self.force == 0.0 {
            ForcingSpec::None
        } else {
            ForcingSpec::Actuator(ActuatorDisk {
                x: self.disk_x,
                y_center: self.disk_y,
                length: self.disk_length,
                force: self.force,
            })
        }
    }

    pub fn time(&self) -> Result<TimeGrid> {
        TimeGrid::new(0.0, self.t_end, self.steps)
    }

    pub fn boundary_model(&self, grid: &StaggeredGrid) -> Result<BoundaryModel> {
        Ok(match self.testcase {
            Testcase::VaryingAngle => BoundaryModel::VaryingAngle,
            Testcase::MovingMode => BoundaryModel::MovingMode {
                t_start: self.mode_t_start,
                t_end: self.mode_t_end,
            },
            Testcase::Custom => {
                let path = self.table.as_ref().expect("validated");
                BoundaryModel::from_csv(path, grid.n_bc(), self.t_end / self.steps as f64)?
            }
        })
    }

    /// Canonical text of the keys that determine the full-order run.
    pub fn physics_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "testcase={}", self.testcase.name());
        let _ = writeln!(s, "nx={}\nny={}", self.nx, self.ny);
        let _ = writeln!(
            s,
            "x_min={:e}\nx_max={:e}\ny_min={:e}\ny_max={:e}",
            self.x_range.0, self.x_range.1, self.y_range.0, self.y_range.1
        );
        let _ = writeln!(s, "nu={:e}\np_inf={:e}", self.nu, self.p_inf);
        let _ = writeln!(
            s,
            "force={:e}\ndisk_x={:e}\ndisk_y={:e}\ndisk_length={:e}",
            self.force, self.disk_x, self.disk_y, self.disk_length
        );
        let _ = writeln!(s, "t_end={:e}\nsteps={}", self.t_end, self.steps);
        let _ = writeln!(
            s,
            "mode_t_start={:e}\nmode_t_end={:e}",
            self.mode_t_start, self.mode_t_end
        );
        if let Some(t) = &self.table {
            let _ = writeln!(s, "table={}", t.display());
        }
        s
    }

    /// Canonical text of every key that influences artifacts.
    pub fn full_text(&self) -> String {
        let mut s = self.physics_text();
        let modes: Vec<String> = self.modes.iter().map(|m| m.to_string()).collect();
        let _ = writeln!(s, "modes={}", modes.join(","));
        if let Some(r) = self.r_bc {
            let _ = writeln!(s, "r_bc={r}");
        }
        let _ = writeln!(s, "seed={}", self.seed);
        s
    }

    pub fn physics_hash(&self) -> String {
        hex(&Sha256::digest(self.physics_text().as_bytes()))
    }

    pub fn full_hash(&self) -> String {
        hex(&Sha256::digest(self.full_text().as_bytes()))
    }
}

pub fn parse_modes(value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("invalid mode count '{s}'")))
        })
        .collect()
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_reproduce_reference_setup() {
        let c = SimConfig::defaults(Testcase::VaryingAngle);
        assert_eq!((c.nx, c.ny, c.steps), (200, 80, 800));
        assert!((c.t_end - 4.0 * std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(SimConfig::defaults(Testcase::MovingMode).t_end, 20.0);
    }

    #[test]
    fn parse_overrides_and_comments() {
        let c = SimConfig::parse(
            "testcase = moving-mode\n# comment\nnx=20\nny = 8 # trailing\nmodes=4,2\n",
        )
        .unwrap();
        assert_eq!(c.testcase, Testcase::MovingMode);
        assert_eq!((c.nx, c.ny), (20, 8));
        assert_eq!(c.modes, vec![4, 2]);
        assert_eq!(c.r_max(), 4);
    }

    #[test]
    fn bad_input_is_a_config_error() {
        assert!(matches!(
            SimConfig::parse("testcase=vortex"),
            Err(Error::Config(_))
        ));
        assert!(matches!(SimConfig::parse("nx=abc"), Err(Error::Config(_))));
        assert!(matches!(
            SimConfig::parse("colour=blue"),
            Err(Error::Config(_))
        ));
        assert!(matches!(SimConfig::parse("modes=0"), Err(Error::Config(_))));
    }

    #[test]
    fn physics_hash_ignores_modes() {
        let a = SimConfig::parse("modes=2").unwrap();
        let b = SimConfig::parse("modes=2,4").unwrap();
        assert_eq!(a.physics_hash(), b.physics_hash());
        assert_ne!(a.full_hash(), b.full_hash());
    }
}
