//! Run configuration file (TOML). Physical quantities carry their unit in the key name.
//! Relative paths are resolved against the directory of the configuration file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use ductflow::dubc::{OutletKind, OutletSpec};
use ductflow::linalg::LinearSolverKind;
use ductflow::measure::{NoiseModel, DEFAULT_SNR_DB, DEFAULT_VENC_FACTOR, DEFAULT_VOXEL_SIZE};
use ductflow::mesh::{
    generate_bifurcation_with, generate_box_channel, generate_channel, read_msh, BifurcationParams, Mesh,
    INLET_TAG, WALL_TAG,
};
use ductflow::roukf::{Resync, DEFAULT_INITIAL_STD};
use ductflow::timestepping::{BoundaryRoles, FlowSolver, InletWaveform, Scheme, SolverConfig};
use ductflow::Real;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub precision: Precision,
    pub mesh: MeshSource,
    #[serde(default)]
    pub boundary: BoundarySection,
    #[serde(default)]
    pub outlets: Vec<OutletEntry>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub inlet: InletSection,
    pub measurement: Option<MeasurementSection>,
    pub estimation: Option<EstimationSection>,
    pub twin: Option<TwinSection>,
    /// Written into manifests; ignored on input.
    pub manifest: Option<ManifestInfo>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum MeshSource {
    Channel(ChannelParams),
    Bifurcation(BifurcationSection),
    Box(BoxParams),
    File(FileSource),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    pub length_cm: f64,
    pub height_cm: f64,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
}

impl ChannelParams {
    /// Cell counts, defaulting to 8 cells across the height and square cells.
    pub fn cells(&self) -> (usize, usize) {
        let ny = self.ny.unwrap_or(8);
        let nx = self.nx.unwrap_or_else(|| ((self.length_cm / self.height_cm * ny as f64).round() as usize).max(1));
        (nx, ny)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BifurcationSection {
    #[serde(default = "two")]
    pub trunk_length_cm: f64,
    #[serde(default = "two")]
    pub branch_length_cm: f64,
    #[serde(default = "one")]
    pub width_cm: f64,
    #[serde(default = "four")]
    pub resolution: usize,
    #[serde(default = "thirty")]
    pub angle_deg: f64,
    #[serde(default = "one")]
    pub branch_width_ratio: f64,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn four() -> usize {
    4
}
fn thirty() -> f64 {
    30.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxParams {
    pub length_cm: f64,
    pub height_cm: f64,
    pub depth_cm: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSource {
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub inlet_tag: i32,
    pub wall_tags: Vec<i32>,
    pub planarity_tol: f64,
}

impl Default for BoundarySection {
    fn default() -> Self {
        Self { inlet_tag: INLET_TAG, wall_tags: vec![WALL_TAG], planarity_tol: ductflow::dubc::DEFAULT_PLANARITY_TOL }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutletKindName {
    Duct,
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutletEntry {
    pub tag: i32,
    pub kind: OutletKindName,
    pub length_cm: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolverName {
    #[default]
    Direct,
    Iterative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub scheme: Scheme,
    pub density_g_cm3: f64,
    pub viscosity_poise: f64,
    pub tau_s: f64,
    pub t_end_s: f64,
    pub gamma_inlet_g_cm2_s: f64,
    pub gamma_tan_g_cm2_s: f64,
    pub gamma_p: f64,
    pub gamma_sd: f64,
    pub gamma_press: f64,
    pub backflow: bool,
    pub linear_solver: LinearSolverName,
    pub iterative_rel_tol: f64,
    pub iterative_restart: usize,
    pub iterative_max_iter: usize,
    /// Snapshot interval; 0 disables snapshots.
    pub snapshot_every_s: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let c = SolverConfig::default();
        Self {
            scheme: c.scheme,
            density_g_cm3: c.rho,
            viscosity_poise: c.mu,
            tau_s: c.tau,
            t_end_s: c.t_end,
            gamma_inlet_g_cm2_s: c.gamma_inlet,
            gamma_tan_g_cm2_s: c.gamma_tan,
            gamma_p: c.gamma_p,
            gamma_sd: c.gamma_sd,
            gamma_press: c.gamma_press,
            backflow: c.backflow,
            linear_solver: LinearSolverName::Direct,
            iterative_rel_tol: 1e-10,
            iterative_restart: 50,
            iterative_max_iter: 2000,
            snapshot_every_s: 0.03,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveformName {
    #[default]
    Cosine,
    Constant,
    File,
}

/// Inflow rate `f(t)` multiplying the unit-flux inlet profile (cm³/s, per unit depth in 2D).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InletSection {
    pub waveform: WaveformName,
    pub period_s: f64,
    pub amplitude_cm3_s: f64,
    pub value_cm3_s: f64,
    pub path: Option<PathBuf>,
}

impl Default for InletSection {
    fn default() -> Self {
        Self { waveform: WaveformName::Cosine, period_s: 0.9, amplitude_cm3_s: 1.0, value_cm3_s: 1.0, path: None }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementMode {
    /// Flow-mesh nodal velocities with additive Gaussian noise.
    #[default]
    HighFidelity,
    /// Voxel mesh with velocity encoding and complex Gaussian noise.
    Mri,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurementSection {
    pub mode: MeasurementMode,
    pub relative_std: f64,
    pub voxel_size_cm: f64,
    pub venc_factor: f64,
    pub snr_db: f64,
    pub cadence_s: f64,
    pub seed: u64,
    /// Run directory whose snapshots are sampled.
    pub trajectory: Option<PathBuf>,
}

impl Default for MeasurementSection {
    fn default() -> Self {
        Self {
            mode: MeasurementMode::HighFidelity,
            relative_std: 0.05,
            voxel_size_cm: DEFAULT_VOXEL_SIZE,
            venc_factor: DEFAULT_VENC_FACTOR,
            snr_db: DEFAULT_SNR_DB,
            cadence_s: 0.03,
            seed: 0,
            trajectory: None,
        }
    }
}

impl MeasurementSection {
    pub fn noise_model(&self) -> NoiseModel {
        match self.mode {
            MeasurementMode::HighFidelity => {
                NoiseModel::Additive { relative_std: self.relative_std, seed: self.seed }
            }
            MeasurementMode::Mri => {
                NoiseModel::Phase { venc_factor: self.venc_factor, snr_db: self.snr_db, seed: self.seed }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSection {
    /// Measurement directory; when absent, twin data are generated from `[twin]`.
    pub measurements: Option<PathBuf>,
    pub estimated_tags: Vec<i32>,
    #[serde(default = "default_baseline")]
    pub baseline_cm: f64,
    /// Initial lengths (defaults to the baseline).
    pub initial_cm: Option<Vec<f64>>,
    #[serde(default = "default_std")]
    pub initial_std: f64,
    pub sigma_obs_cm_s: Option<f64>,
    #[serde(default)]
    pub resync: Resync,
    pub reference_cm: Option<Vec<f64>>,
}

fn default_baseline() -> f64 {
    2.8
}
fn default_std() -> f64 {
    DEFAULT_INITIAL_STD
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwinLength {
    pub tag: i32,
    pub length_cm: f64,
}

/// True duct lengths of a twin experiment; outlets not listed keep their table length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwinSection {
    pub lengths: Vec<TwinLength>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestInfo {
    pub command: String,
    pub version: String,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl RunConfig {
    /// Reads, resolves paths against the file location and validates.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
        let base = std::path::absolute(&base)?;
        cfg.resolve_paths(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.output_dir.as_mut() {
            fix(p);
        }
        if let MeshSource::File(f) = &mut self.mesh {
            fix(&mut f.path);
        }
        if let Some(p) = self.inlet.path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.measurement.as_mut().and_then(|m| m.trajectory.as_mut()) {
            fix(p);
        }
        if let Some(p) = self.estimation.as_mut().and_then(|e| e.measurements.as_mut()) {
            fix(p);
        }
    }

    /// Checks that do not need the mesh.
    pub fn validate(&self) -> Result<(), CliError> {
        self.solver_config().validate().map_err(|e| usage(e.to_string()))?;
        if self.solver.snapshot_every_s < 0.0 {
            return Err(usage("snapshot_every_s must be non-negative"));
        }
        if self.solver.snapshot_every_s > 0.0 {
            self.solver_config().steps_per(self.solver.snapshot_every_s).map_err(|e| usage(e.to_string()))?;
        }
        for (i, o) in self.outlets.iter().enumerate() {
            if self.outlets[..i].iter().any(|p| p.tag == o.tag) {
                return Err(usage(format!("outlet tag {} listed twice", o.tag)));
            }
            match (o.kind, o.length_cm) {
                (OutletKindName::Duct, None) => {
                    return Err(usage(format!("duct outlet {} needs length_cm", o.tag)));
                }
                (OutletKindName::Duct, Some(l)) if !(l > 0.0) || !l.is_finite() => {
                    return Err(usage(format!("duct outlet {} has non-positive length {l}", o.tag)));
                }
                (OutletKindName::Free, Some(_)) => {
                    return Err(usage(format!("free outlet {} cannot have a length", o.tag)));
                }
                _ => {}
            }
        }
        if let MeshSource::File(f) = &self.mesh {
            if !f.path.is_file() {
                return Err(usage(format!("mesh file {} does not exist", f.path.display())));
            }
        }
        match self.inlet.waveform {
            WaveformName::File => match &self.inlet.path {
                Some(p) if p.is_file() => {}
                Some(p) => return Err(usage(format!("waveform file {} does not exist", p.display()))),
                None => return Err(usage("file waveform needs inlet.path")),
            },
            WaveformName::Cosine if !(self.inlet.period_s > 0.0) => {
                return Err(usage("inlet.period_s must be positive"));
            }
            _ => {}
        }
        if let Some(m) = &self.measurement {
            if !(m.cadence_s > 0.0) {
                return Err(usage("measurement.cadence_s must be positive"));
            }
            if let Some(p) = &m.trajectory {
                if !p.is_dir() {
                    return Err(usage(format!("trajectory directory {} does not exist", p.display())));
                }
            }
        }
        if let Some(e) = &self.estimation {
            self.duct_positions(&e.estimated_tags)?;
            let p = e.estimated_tags.len();
            if e.initial_cm.as_ref().is_some_and(|v| v.len() != p) {
                return Err(usage(format!("estimation.initial_cm needs {p} values")));
            }
            if e.reference_cm.as_ref().is_some_and(|v| v.len() != p) {
                return Err(usage(format!("estimation.reference_cm needs {p} values")));
            }
            if !(e.baseline_cm > 0.0) || !(e.initial_std > 0.0) {
                return Err(usage("estimation.baseline_cm and initial_std must be positive"));
            }
            if let Some(dir) = &e.measurements {
                if !dir.is_dir() {
                    return Err(usage(format!("measurement directory {} does not exist", dir.display())));
                }
            }
        }
        if let Some(t) = &self.twin {
            for l in &t.lengths {
                self.duct_positions(&[l.tag])?;
                if !(l.length_cm > 0.0) {
                    return Err(usage(format!("twin length for outlet {} must be positive", l.tag)));
                }
            }
        }
        Ok(())
    }

    /// Position among the duct outlets of each tag; unknown or free outlets are an error.
    pub fn duct_positions(&self, tags: &[i32]) -> Result<Vec<usize>, CliError> {
        let ducts: Vec<i32> =
            self.outlets.iter().filter(|o| o.kind == OutletKindName::Duct).map(|o| o.tag).collect();
        tags.iter()
            .enumerate()
            .map(|(i, t)| {
                if tags[..i].contains(t) {
                    return Err(usage(format!("outlet tag {t} listed twice")));
                }
                ducts.iter().position(|d| d == t).ok_or_else(|| {
                    usage(format!("unknown estimated outlet tag {t}: not a duct outlet of the outlet table"))
                })
            })
            .collect()
    }

    /// Duct lengths in table order.
    pub fn duct_lengths(&self) -> Vec<f64> {
        self.outlets.iter().filter_map(|o| o.length_cm).collect()
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        let every = if s.snapshot_every_s > 0.0 { (s.snapshot_every_s / s.tau_s).round() as usize } else { 0 };
        SolverConfig {
            rho: s.density_g_cm3,
            mu: s.viscosity_poise,
            tau: s.tau_s,
            t_end: s.t_end_s,
            scheme: s.scheme,
            gamma_inlet: s.gamma_inlet_g_cm2_s,
            gamma_tan: s.gamma_tan_g_cm2_s,
            gamma_p: s.gamma_p,
            gamma_sd: s.gamma_sd,
            gamma_press: s.gamma_press,
            backflow: s.backflow,
            linear_solver: match s.linear_solver {
                LinearSolverName::Direct => LinearSolverKind::Direct,
                LinearSolverName::Iterative => LinearSolverKind::Iterative {
                    rel_tol: s.iterative_rel_tol,
                    restart: s.iterative_restart,
                    max_iter: s.iterative_max_iter,
                },
            },
            snapshot_every: every,
        }
    }

    pub fn waveform(&self) -> Result<InletWaveform, CliError> {
        Ok(match self.inlet.waveform {
            WaveformName::Cosine => {
                InletWaveform::Cosine { period: self.inlet.period_s, amplitude: self.inlet.amplitude_cm3_s }
            }
            WaveformName::Constant => InletWaveform::Constant { value: self.inlet.value_cm3_s },
            WaveformName::File => {
                let p = self.inlet.path.as_ref().ok_or_else(|| usage("file waveform needs inlet.path"))?;
                InletWaveform::from_csv(p).map_err(|e| usage(format!("waveform {}: {e}", p.display())))?
            }
        })
    }

    pub fn roles(&self) -> BoundaryRoles {
        BoundaryRoles { inlet_tag: self.boundary.inlet_tag, wall_tags: self.boundary.wall_tags.clone() }
    }

    pub fn build_mesh<T: Real>(&self) -> Result<Mesh<T>, CliError> {
        Ok(match &self.mesh {
            MeshSource::Channel(c) => {
                let (nx, ny) = c.cells();
                generate_channel(c.length_cm, c.height_cm, nx, ny)?
            }
            MeshSource::Bifurcation(b) => generate_bifurcation_with(
                b.trunk_length_cm,
                b.branch_length_cm,
                b.width_cm,
                b.resolution,
                BifurcationParams { angle_deg: b.angle_deg, branch_width_ratio: b.branch_width_ratio },
            )?,
            MeshSource::Box(b) => generate_box_channel(b.length_cm, b.height_cm, b.depth_cm, [b.nx, b.ny, b.nz])?,
            MeshSource::File(f) => read_msh(&f.path)?,
        })
    }

    /// Every mesh boundary tag must have exactly one role; reported before any solve.
    pub fn check_tags<T: Real>(&self, mesh: &Mesh<T>) -> Result<(), CliError> {
        let tags = mesh.tags();
        for tag in &tags {
            let n = usize::from(self.boundary.inlet_tag == *tag)
                + self.boundary.wall_tags.iter().filter(|w| *w == tag).count()
                + self.outlets.iter().filter(|o| o.tag == *tag).count();
            match n {
                0 => return Err(usage(format!("boundary tag {tag} has no inlet, wall or outlet entry"))),
                1 => {}
                _ => return Err(usage(format!("boundary tag {tag} is assigned more than one role"))),
            }
        }
        let listed = std::iter::once(self.boundary.inlet_tag)
            .chain(self.boundary.wall_tags.iter().copied())
            .chain(self.outlets.iter().map(|o| o.tag));
        for t in listed {
            if !tags.contains(&t) {
                return Err(usage(format!("tag {t} does not occur on the mesh boundary")));
            }
        }
        Ok(())
    }

    /// Solver with the table lengths, or `lengths` (duct order) when given.
    pub fn build_solver<T: Real>(
        &self,
        mesh: Arc<Mesh<T>>,
        lengths: Option<&[f64]>,
    ) -> Result<FlowSolver<T>, CliError> {
        self.check_tags(&mesh)?;
        let outlets = self
            .outlets
            .iter()
            .map(|o| {
                let kind = match o.length_cm {
                    Some(l) => OutletKind::Duct { length_cm: l },
                    None => OutletKind::Free,
                };
                OutletSpec::new(&mesh, o.tag, kind, self.boundary.planarity_tol)
            })
            .collect::<ductflow::Result<Vec<_>>>()?;
        let mut solver = FlowSolver::new(mesh, self.roles(), outlets, self.solver_config())?;
        if let Some(l) = lengths {
            solver.set_lengths(l)?;
        }
        Ok(solver)
    }

    /// True duct lengths of the twin experiment (duct order).
    pub fn twin_lengths(&self) -> Result<Vec<f64>, CliError> {
        let twin = self.twin.as_ref().ok_or_else(|| usage("twin data need a [twin] section"))?;
        let mut lengths = self.duct_lengths();
        for t in &twin.lengths {
            let k = self.duct_positions(&[t.tag])?[0];
            lengths[k] = t.length_cm;
        }
        Ok(lengths)
    }
}
