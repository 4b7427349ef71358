//! Run directories: creation, manifests and snapshot listing.

use std::fs;
use std::path::{Path, PathBuf};

use ductflow::mesh::{read_msh, Mesh};
use ductflow::vtk::{read_vtk, truncate_components};
use ductflow::Real;

use crate::config::{ManifestInfo, RunConfig};
use crate::error::CliError;

pub const MESH_FILE: &str = "mesh.msh";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Creates `dir`, which must not exist yet or be empty.
pub fn create_output_dir(dir: &Path) -> Result<(), CliError> {
    if dir.exists() {
        let empty = dir.is_dir() && fs::read_dir(dir)?.next().is_none();
        if !empty {
            return Err(CliError::Domain(format!(
                "output directory {} already exists and is not empty",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Writes the resolved configuration plus command and version; it can be passed back
/// to `--config` to repeat the run.
pub fn write_manifest(cfg: &RunConfig, dir: &Path, command: &str) -> Result<(), CliError> {
    let mut m = cfg.clone();
    m.output_dir = Some(std::path::absolute(dir)?);
    m.manifest = Some(ManifestInfo { command: command.to_string(), version: env!("CARGO_PKG_VERSION").to_string() });
    let text = toml::to_string(&m).map_err(|e| CliError::Domain(format!("manifest: {e}")))?;
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(())
}

pub fn snapshot_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(SNAPSHOT_DIR).join(format!("u_{step:06}.vtk"))
}

/// Mesh and velocity snapshots `(t, u)` of a run directory, in time order.
pub struct RunData<T> {
    pub mesh: Mesh<T>,
    pub snapshots: Vec<(f64, Vec<T>)>,
}

pub fn read_run<T: Real>(dir: &Path, field: &str) -> Result<RunData<T>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("run directory {} does not exist", dir.display())));
    }
    let mesh: Mesh<T> = read_msh(dir.join(MESH_FILE))?;
    let snap_dir = dir.join(SNAPSHOT_DIR);
    let mut files: Vec<PathBuf> = match fs::read_dir(&snap_dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "vtk"))
            .collect(),
        Err(_) => Vec::new(),
    };
    files.sort();
    let mut snapshots = Vec::with_capacity(files.len());
    for f in files {
        let snap = read_vtk(&f)?;
        let t = snap.time.ok_or_else(|| CliError::Domain(format!("{} has no time stamp", f.display())))?;
        let data = snap
            .field(field)
            .ok_or_else(|| CliError::Domain(format!("{} has no {field} field", f.display())))?;
        if snap.points.len() != mesh.num_vertices() {
            return Err(CliError::Domain(format!("{} does not match the run mesh", f.display())));
        }
        let u = truncate_components(data, mesh.dim()).into_iter().map(T::lit).collect();
        snapshots.push((t, u));
    }
    Ok(RunData { mesh, snapshots })
}
