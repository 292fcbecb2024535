use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use faer::Mat;

use super::config::SimConfig;
use super::container::{write_atomic, ArtifactKind, Container};
use super::ledger::{LedgerEntry, RunLedger};
use crate::boundary::{BcReduction, BoundaryModel, TimeGrid};
use crate::diagnostics::{
    energy_error, equivalence_error, mass_violation, relative_spectrum, timing_report,
    velocity_error, MetricSeries, TimingRow,
};
use crate::error::{Error, Result};
use crate::fom::{fom_integrate, initial_condition, FomOptions};
use crate::lifting::{homogeneous_pod, homogenize_snapshots, LiftingOperator, PodBasis};
use crate::mesh::Operators;
use crate::rom::{
    rom_integrate, vo_initial, vp_initial, vp_rom_integrate, EnergySeries, QuadraticSystem,
    RomOperators, RomTrajectory, VpRomOperators,
};

pub const FOM_FILE: &str = "fom.bin";
pub const HOMOGENIZED_FILE: &str = "homogenized.bin";
pub const POD_FILE: &str = "pod.bin";
pub const OFFLINE_FILE: &str = "offline.bin";
pub const VP_OFFLINE_FILE: &str = "vp_offline.bin";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TIMING_FILE: &str = "timing.txt";

pub fn online_file(r: usize) -> String {
    format!("online_r{r}.bin")
}

pub fn vp_online_file(r: usize) -> String {
    format!("vp_online_r{r}.bin")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Fom,
    Homogenize,
    Pod,
    Offline,
    Online,
    VpOnline,
    Compare,
}

impl Stage {
    /// Execution order used by `all`.
    pub const ALL: [Stage; 7] = [
        Stage::Fom,
        Stage::Homogenize,
        Stage::Pod,
        Stage::Offline,
        Stage::Online,
        Stage::VpOnline,
        Stage::Compare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Fom => "fom",
            Stage::Homogenize => "homogenize",
            Stage::Pod => "pod",
            Stage::Offline => "offline",
            Stage::Online => "online",
            Stage::VpOnline => "vp-online",
            Stage::Compare => "compare",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage '{s}'")))
    }
}

/// Files a stage produced.
#[derive(Debug, Clone, Default)]
pub struct StageOutput {
    pub artifacts: Vec<PathBuf>,
    pub seconds: f64,
}

/// Per-R summary from `compare`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub r: usize,
    pub r_bc: usize,
    pub velocity_error: f64,
    pub mass_violation: f64,
    pub energy_error: f64,
    pub cross_energy: f64,
    pub equivalence_max: Option<f64>,
    pub equivalence_mean: Option<f64>,
}

/// A run directory with its config and ledger.
pub struct Pipeline {
    pub config: SimConfig,
    dir: PathBuf,
    ledger: RunLedger,
}

/// Rebuildable state shared by the stages.
struct Setup {
    ops: Operators,
    model: BoundaryModel,
    time: TimeGrid,
}

impl Pipeline {
    /// Opens (or creates) `dir` and writes the config snapshot.
    pub fn new(config: SimConfig, dir: &Path) -> Result<Self> {
        config.validate()?;
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("config.txt"), config.full_text().as_bytes())?;
        let ledger = RunLedger::open(dir)?;
        Ok(Self {
            config,
            dir: dir.to_path_buf(),
            ledger,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn ledger(&self) -> &RunLedger {
        &self.ledger
    }

    pub fn run_stage(&mut self, stage: Stage) -> Result<StageOutput> {
        log::info!("stage {} in {}", stage.name(), self.dir.display());
        let start = Instant::now();
        let mut out = match stage {
            Stage::Fom => self.fom(),
            Stage::Homogenize => self.homogenize(),
            Stage::Pod => self.pod(),
            Stage::Offline => self.offline(),
            Stage::Online => self.online(),
            Stage::VpOnline => self.vp_online(),
            Stage::Compare => self.compare().map(|(o, _)| o),
        }
        .map_err(|e| stage_context(stage, e))?;
        out.seconds = start.elapsed().as_secs_f64();
        Ok(out)
    }

    /// Runs every stage in order and returns the sweep summary.
    pub fn run_all(&mut self) -> Result<Vec<SweepRow>> {
        for stage in &Stage::ALL[..Stage::ALL.len() - 1] {
            self.run_stage(*stage)?;
        }
        self.compare()
            .map(|(_, rows)| rows)
            .map_err(|e| stage_context(Stage::Compare, e))
    }

    fn setup(&self) -> Result<Setup> {
        let grid = self.config.grid()?;
        let model = self.config.boundary_model(&grid)?;
        let ops = Operators::assemble(grid, self.config.forcing())?;
        Ok(Setup {
            ops,
            model,
            time: self.config.time()?,
        })
    }

    fn new_container(&self, kind: ArtifactKind, s: &Setup, config_hash: &str) -> Container {
        let mut c = Container::new(
            kind,
            s.ops.n_vel(),
            s.ops.n_p(),
            s.time.steps,
            s.ops.grid.fingerprint(),
        );
        c.set_meta("config", config_hash);
        c.set_meta("testcase", self.config.testcase.name());
        c
    }

    fn save(
        &mut self,
        stage: &str,
        name: &str,
        bytes: &[u8],
        seconds: f64,
        config: String,
        out: &mut StageOutput,
    ) -> Result<()> {
        let path = self.dir.join(name);
        let sha256 = write_atomic(&path, bytes)?;
        self.ledger.record(LedgerEntry {
            stage: stage.into(),
            artifact: name.into(),
            sha256,
            seconds,
            config,
        })?;
        out.artifacts.push(path);
        Ok(())
    }

    fn load(&self, name: &str, kind: ArtifactKind, config: &str, s: &Setup) -> Result<Container> {
        let bytes = self.ledger.verified_bytes(name, config)?;
        let c =
            Container::from_bytes(&bytes).map_err(|e| Error::Artifact(format!("{name}: {e}")))?;
        drop(bytes);
        if c.kind != kind {
            return Err(Error::Artifact(format!(
                "{name}: expected {kind:?}, found {:?}",
                c.kind
            )));
        }
        if c.grid_hash != s.ops.grid.fingerprint()
            || c.n_v != s.ops.n_vel() as u64
            || c.steps != s.time.steps as u64
        {
            return Err(Error::Artifact(format!(
                "{name}: grid or time grid mismatch"
            )));
        }
        if c.meta("config")? != config {
            return Err(Error::Artifact(format!("{name}: config hash mismatch")));
        }
        Ok(c)
    }

    fn fom(&mut self) -> Result<StageOutput> {
        let s = self.setup()?;
        let hash = self.config.physics_hash();
        let start = Instant::now();
        let snaps = fom_integrate(&s.ops, &s.model, s.time, FomOptions::default())?;
        let seconds = start.elapsed().as_secs_f64();
        let mut c = self.new_container(ArtifactKind::Snapshots, &s, &hash);
        c.put_mat("velocity", &snaps.velocity);
        if let Some(p) = &snaps.pressure {
            c.put_mat("pressure", p);
        }
        c.put_vec("kinetic_energy", &snaps.kinetic_energy);
        c.put_vec("divergence_defect", &snaps.divergence_defect);
        c.put_vec("energy_residual", &snaps.energy_residual);
        drop(snaps);
        let mut out = StageOutput::default();
        self.save("fom", FOM_FILE, &c.to_bytes(), seconds, hash, &mut out)?;
        Ok(out)
    }

    fn homogenize(&mut self) -> Result<StageOutput> {
        let s = self.setup()?;
        let hash = self.config.physics_hash();
        let fom = self.load(FOM_FILE, ArtifactKind::Snapshots, &hash, &s)?;
        let mut snaps = crate::fom::SnapshotSet {
            time: s.time,
            velocity: fom.mat("velocity")?,
            pressure: None,
            divergence_defect: Vec::new(),
            kinetic_energy: Vec::new(),
            energy_residual: Vec::new(),
        };
        drop(fom);
        let start = Instant::now();
        homogenize_snapshots(&mut snaps, &s.ops, &s.model)?;
        let seconds = start.elapsed().as_secs_f64();
        let mut c = self.new_container(ArtifactKind::Homogenized, &s, &hash);
        c.put_mat("velocity", &snaps.velocity);
        drop(snaps);
        let mut out = StageOutput::default();
        self.save(
            "homogenize",
            HOMOGENIZED_FILE,
            &c.to_bytes(),
            seconds,
            hash,
            &mut out,
        )?;
        Ok(out)
    }

    fn r_bc_max(&self) -> usize {
        self.config
            .modes
            .iter()
            .map(|&r| self.config.r_bc_for(r))
            .max()
            .unwrap_or(1)
    }

    fn pod(&mut self) -> Result<StageOutput> {
        let s = self.setup()?;
        let physics = self.config.physics_hash();
        let hash = self.config.full_hash();
        let hom = self.load(HOMOGENIZED_FILE, ArtifactKind::Homogenized, &physics, &s)?;
        let x = hom.mat("velocity")?;
        drop(hom);
        let start = Instant::now();
        let basis = homogeneous_pod(&x, &s.ops, self.config.r_max())?;
        drop(x);
        let bc = BcReduction::new(&s.model, &s.ops.grid, s.time, self.r_bc_max())?;
        let seconds = start.elapsed().as_secs_f64();
        let mut c = self.new_container(ArtifactKind::Pod, &s, &hash);
        c.set_meta("numerical_rank", basis.numerical_rank);
        c.put_mat("phi_hom", &basis.phi);
        c.put_vec("singular_values", &basis.singular_values);
        c.put_mat("phi_bc", &bc.phi);
        c.put_vec("bc_singular_values", &bc.singular_values);
        let mut out = StageOutput::default();
        self.save("pod", POD_FILE, &c.to_bytes(), seconds, hash, &mut out)?;
        Ok(out)
    }

    fn load_pod(&self, s: &Setup) -> Result<(PodBasis, BcReduction)> {
        let c = self.load(POD_FILE, ArtifactKind::Pod, &self.config.full_hash(), s)?;
        let basis = PodBasis {
            phi: c.mat("phi_hom")?,
            singular_values: c.vec("singular_values")?,
            numerical_rank: c
                .meta("numerical_rank")?
                .parse()
                .map_err(|_| Error::Artifact("bad numerical_rank".into()))?,
        };
        let bc = BcReduction::with_basis(
            &s.model,
            &s.ops.grid,
            s.time,
            c.mat("phi_bc")?,
            c.vec("bc_singular_values")?,
        )?;
        Ok((basis, bc))
    }

    fn offline(&mut self) -> Result<StageOutput> {
        let s = self.setup()?;
        let hash = self.config.full_hash();
        let (basis, bc) = self.load_pod(&s)?;
        let start = Instant::now();
        let lift = LiftingOperator::build(&s.ops, &bc)?;
        let rom = RomOperators::build(&s.ops, &basis, &lift, &bc)?;
        let seconds = start.elapsed().as_secs_f64();
        let mut c = self.new_container(ArtifactKind::Offline, &s, &hash);
        let sys = &rom.system;
        c.put_vec("k0", &sys.k0);
        c.put_mat("la", &sys.la);
        c.put_mat("lc", &sys.lc);
        let [qaa, qac, qcc] = sys.raw_parts();
        c.put_vec("qaa", qaa);
        c.put_vec("qac", qac);
        c.put_vec("qcc", qcc);
        c.put_mat("phi_hom", &rom.phi_hom);
        c.put_mat("f_inhom", &rom.f_inhom);
        c.put_mat("phi_bc", &rom.phi_bc);
        c.put_mat("inhom_gram", &rom.inhom_gram);
        c.put_mat("cross_gram", &rom.cross_gram);
        let mut out = StageOutput::default();
        self.save(
            "offline",
            OFFLINE_FILE,
            &c.to_bytes(),
            seconds,
            hash,
            &mut out,
        )?;
        Ok(out)
    }

    fn load_offline(&self, s: &Setup) -> Result<(RomOperators, BcReduction)> {
        let c = self.load(
            OFFLINE_FILE,
            ArtifactKind::Offline,
            &self.config.full_hash(),
            s,
        )?;
        let system = QuadraticSystem::from_raw_parts(
            c.vec("k0")?,
            c.mat("la")?,
            c.mat("lc")?,
            c.vec("qaa")?,
            c.vec("qac")?,
            c.vec("qcc")?,
        )?;
        let rom = RomOperators {
            system,
            phi_hom: c.mat("phi_hom")?,
            f_inhom: c.mat("f_inhom")?,
            phi_bc: c.mat("phi_bc")?,
            inhom_gram: c.mat("inhom_gram")?,
            cross_gram: c.mat("cross_gram")?,
        };
        let bc = BcReduction::with_basis(
            &s.model,
            &s.ops.grid,
            s.time,
            rom.phi_bc.clone(),
            Vec::new(),
        )?;
        Ok((rom, bc))
    }

    fn online(&mut self) -> Result<StageOutput> {
        let s = self.setup()?;
        let hash = self.config.full_hash();
        let (rom, bc) = self.load_offline(&s)?;
        let v0 = initial_condition(&s.ops, &s.model, s.time.t0)?.v;
        let mut out = StageOutput::default();
        for r in self.config.modes.clone() {
            let rom_r = rom.truncate(r, self.config.r_bc_for(r));
            let bc_r = bc.truncate(rom_r.r_bc());
            let a0 = vo_initial(&rom_r.phi_hom, &s.ops.omega, &v0);
            let start = Instant::now();
            let traj = rom_integrate(&rom_r, &bc_r, &a0, s.time)?;
            let seconds = start.elapsed().as_secs_f64();
            let mut c = self.new_container(ArtifactKind::Trajectory, &s, &hash);
            c.set_meta("model", "velocity-only");
            c.set_meta("r_hom", rom_r.r_hom());
            c.set_meta("r_bc", rom_r.r_bc());
            c.put_mat("a", &traj.a);
            let name = online_file(r);
            self.save(
                "online",
                &name,
                &c.to_bytes(),
                seconds,
                hash.clone(),
                &mut out,
            )?;
            let csv = trajectory_csv(&s.time, &traj.a, "a");
            let csv_name = format!("online_r{r}.csv");
            self.save(
                "online",
                &csv_name,
                csv.as_bytes(),
                0.0,
                hash.clone(),
                &mut out,
            )?;
        }
        Ok(out)
    }

    fn vp_online(&mut self) -> Result<StageOutput> {
        let s = self.setup()?;
        let hash = self.config.full_hash();
        let (basis, bc) = self.load_pod(&s)?;
        let start = Instant::now();
        let lift = LiftingOperator::build(&s.ops, &bc)?;
        let vp = VpRomOperators::build(&s.ops, &basis, &lift, &bc)?;
        let offline_seconds = start.elapsed().as_secs_f64();
        drop(lift);
        let mut c = self.new_container(ArtifactKind::VpOffline, &s, &hash);
        let ch = &vp.checks;
        c.set_meta("orthonormality", format!("{:e}", ch.orthonormality));
        c.set_meta(
            "homogeneous_pressure",
            format!("{:e}", ch.homogeneous_pressure),
        );
        c.set_meta(
            "lifting_outside_span",
            format!("{:e}", ch.lifting_outside_span),
        );
        c.set_meta("rank_b", ch.rank_b);
        c.set_meta("r_p", ch.r_p);
        c.set_meta("cond_lr", format!("{:e}", ch.cond_lr));
        c.put_mat("div_r", &vp.div_r);
        c.put_mat("grad_r", &vp.grad_r);
        c.put_mat("bc_r", &vp.bc_r);
        let mut out = StageOutput::default();
        self.save(
            "vp-offline",
            VP_OFFLINE_FILE,
            &c.to_bytes(),
            offline_seconds,
            hash.clone(),
            &mut out,
        )?;

        let v0 = initial_condition(&s.ops, &s.model, s.time.t0)?.v;
        for r in self.config.modes.clone() {
            let vp_r = vp.truncate(r, self.config.r_bc_for(r))?;
            let bc_r = bc.truncate(vp_r.r_bc());
            let a0 = vp_initial(&vp_r, &s.ops.omega, &v0, bc_r.coeffs(0))?;
            let start = Instant::now();
            let traj = vp_rom_integrate(&vp_r, &bc_r, &a0, s.time)?;
            let seconds = start.elapsed().as_secs_f64();
            let mut c = self.new_container(ArtifactKind::Trajectory, &s, &hash);
            c.set_meta("model", "velocity-pressure");
            c.set_meta("r_hom", vp_r.r_hom);
            c.set_meta("r_bc", vp_r.r_bc());
            c.set_meta("r_p", vp_r.r_p());
            c.put_mat("a", &traj.a);
            c.put_mat("b", &traj.b);
            // velocity in full space, so compare does not need the VP operators
            let mut vel = Mat::zeros(s.ops.n_vel(), traj.a.ncols());
            for j in 0..traj.a.ncols() {
                vel.col_as_slice_mut(j)
                    .copy_from_slice(&traj.velocity(&vp_r, j));
            }
            c.put_mat("velocity", &vel);
            let name = vp_online_file(r);
            self.save(
                "vp-online",
                &name,
                &c.to_bytes(),
                seconds,
                hash.clone(),
                &mut out,
            )?;
        }
        Ok(out)
    }

    fn compare(&mut self) -> Result<(StageOutput, Vec<SweepRow>)> {
        let s = self.setup()?;
        let hash = self.config.full_hash();
        let physics = self.config.physics_hash();
        let fom = self.load(FOM_FILE, ArtifactKind::Snapshots, &physics, &s)?;
        let fom_vel = fom.mat("velocity")?;
        let k_fom = fom.vec("kinetic_energy")?;
        drop(fom);
        let (rom, bc) = self.load_offline(&s)?;
        let pod_c = self.load(POD_FILE, ArtifactKind::Pod, &hash, &s)?;
        let mut out = StageOutput::default();

        let spectrum = |sv: &[f64]| {
            let mut csv = String::from("index,relative_singular_value\n");
            for (i, x) in relative_spectrum(sv).iter().enumerate() {
                let _ = writeln!(csv, "{},{x:.17e}", i + 1);
            }
            csv
        };
        let sv_hom = spectrum(&pod_c.vec("singular_values")?);
        let sv_bc = spectrum(&pod_c.vec("bc_singular_values")?);
        drop(pod_c);
        self.save(
            "compare",
            "spectrum_hom.csv",
            sv_hom.as_bytes(),
            0.0,
            hash.clone(),
            &mut out,
        )?;
        self.save(
            "compare",
            "spectrum_bc.csv",
            sv_bc.as_bytes(),
            0.0,
            hash.clone(),
            &mut out,
        )?;

        let have_vp = self.ledger.latest(VP_OFFLINE_FILE).is_some();
        let mut rows = Vec::new();
        let mut timings = Vec::new();
        let fom_secs = self.seconds_of(FOM_FILE);
        let offline_secs = self.seconds_of(OFFLINE_FILE);
        for r in self.config.modes.clone() {
            let rom_r = rom.truncate(r, self.config.r_bc_for(r));
            let bc_r = bc.truncate(rom_r.r_bc());
            let tc = self.load(&online_file(r), ArtifactKind::Trajectory, &hash, &s)?;
            let traj = RomTrajectory {
                time: s.time,
                a: tc.mat("a")?,
            };
            let vo = |j: usize| traj.velocity(&rom_r, &bc_r, j);
            let err = velocity_error(&fom_vel, s.time, &s.ops.omega, vo)?;
            let mass = mass_violation(&s.ops, &s.model, s.time, vo);
            let energy = EnergySeries::compute(&rom_r, &bc_r, &traj);
            let eerr = energy_error(&k_fom, &energy.k, s.time)?;
            let cross = MetricSeries {
                name: "relative_cross_energy".into(),
                times: s.time.times(),
                values: energy
                    .cross
                    .iter()
                    .zip(&energy.k)
                    .map(|(c, k)| c.abs() / k.abs().max(f64::MIN_POSITIVE))
                    .collect(),
                normalization: 1.0,
            };
            let mut series = vec![err, mass, eerr, cross];
            let mut row = SweepRow {
                r,
                r_bc: rom_r.r_bc(),
                velocity_error: series[0].max(),
                mass_violation: series[1].max(),
                energy_error: series[2].max(),
                cross_energy: series[3].max(),
                equivalence_max: None,
                equivalence_mean: None,
            };
            if have_vp {
                let vc = self.load(&vp_online_file(r), ArtifactKind::Trajectory, &hash, &s)?;
                let vp_vel = vc.mat("velocity")?;
                let eq = equivalence_error(&s.ops.omega, s.time, vo, |j| {
                    vp_vel.col_as_slice(j).to_vec()
                });
                row.equivalence_max = Some(eq.max());
                row.equivalence_mean = Some(eq.mean());
                series.push(eq);
            }
            for m in &series {
                let name = format!("metrics/{}_r{r}.csv", m.name);
                self.save(
                    "compare",
                    &name,
                    m.to_csv().as_bytes(),
                    0.0,
                    hash.clone(),
                    &mut out,
                )?;
            }
            timings.push(TimingRow {
                r,
                fom: Duration::from_secs_f64(fom_secs),
                offline: Duration::from_secs_f64(offline_secs),
                online: Duration::from_secs_f64(self.seconds_of(&online_file(r))),
            });
            rows.push(row);
        }
        let mut csv = String::from(
            "r,r_bc,velocity_error,mass_violation,energy_error,cross_energy,equivalence_max,equivalence_mean\n",
        );
        for row in &rows {
            let opt = |x: Option<f64>| x.map(|v| format!("{v:.17e}")).unwrap_or_default();
            let _ = writeln!(
                csv,
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{},{}",
                row.r,
                row.r_bc,
                row.velocity_error,
                row.mass_violation,
                row.energy_error,
                row.cross_energy,
                opt(row.equivalence_max),
                opt(row.equivalence_mean)
            );
        }
        self.save(
            "compare",
            SUMMARY_FILE,
            csv.as_bytes(),
            0.0,
            hash.clone(),
            &mut out,
        )?;
        // timings differ between runs, so they are written but not ledgered
        let path = self.dir.join(TIMING_FILE);
        write_atomic(&path, timing_report(&timings).as_bytes())?;
        out.artifacts.push(path);
        Ok((out, rows))
    }

    fn seconds_of(&self, artifact: &str) -> f64 {
        self.ledger.latest(artifact).map_or(0.0, |e| e.seconds)
    }
}

fn stage_context(stage: Stage, e: Error) -> Error {
    match e {
        Error::Artifact(msg) => Error::Artifact(format!("[{}] {msg}", stage.name())),
        Error::Config(msg) => Error::Config(format!("[{}] {msg}", stage.name())),
        other => {
            log::error!("stage {} failed", stage.name());
            other
        }
    }
}

/// One row per time level: `t,<prefix>0,<prefix>1,...`.
pub fn trajectory_csv(time: &TimeGrid, coeffs: &Mat<f64>, prefix: &str) -> String {
    let mut s = String::from("t");
    for i in 0..coeffs.nrows() {
        let _ = write!(s, ",{prefix}{i}");
    }
    s.push('\n');
    for j in 0..coeffs.ncols() {
        let _ = write!(s, "{:.17e}", time.t(j));
        for x in coeffs.col_as_slice(j) {
            let _ = write!(s, ",{x:.17e}");
        }
        s.push('\n');
    }
    s
}
