use std::path::Path;

use ductflow::measure::{build_measurement_mesh, synthesize_series, MeasurementMesh, MeasurementSeries};
use ductflow::mesh::Mesh;
use ductflow::Real;

use crate::config::{MeasurementMode, MeasurementSection, Precision, RunConfig};
use crate::error::CliError;
use crate::output::{create_output_dir, read_run, write_manifest};

pub fn measurement_mesh<T: Real>(m: &MeasurementSection, domain: &Mesh<T>) -> Result<MeasurementMesh<T>, CliError> {
    Ok(match m.mode {
        MeasurementMode::HighFidelity => MeasurementMesh::from_domain(domain),
        MeasurementMode::Mri => build_measurement_mesh(domain, m.voxel_size_cm)?,
    })
}

/// Samples `(t, u)` snapshots on `domain` into a measurement series.
pub fn synthesize<T: Real>(
    m: &MeasurementSection,
    domain: &Mesh<T>,
    snapshots: &[(f64, Vec<T>)],
) -> Result<MeasurementSeries<T>, CliError> {
    let meas = measurement_mesh(m, domain)?;
    let trajectory: Vec<(f64, &[T])> = snapshots.iter().map(|(t, u)| (*t, u.as_slice())).collect();
    Ok(synthesize_series(&trajectory, domain, &meas, m.cadence_s, m.noise_model())?)
}

pub fn run(cfg: &RunConfig, trajectory: Option<&Path>, out: &Path, command: &str) -> Result<(), CliError> {
    match cfg.precision {
        Precision::F32 => sample::<f32>(cfg, trajectory, out, command),
        Precision::F64 => sample::<f64>(cfg, trajectory, out, command),
    }
}

fn sample<T: Real>(cfg: &RunConfig, trajectory: Option<&Path>, out: &Path, command: &str) -> Result<(), CliError> {
    let m = cfg.measurement.clone().unwrap_or_default();
    let dir = trajectory
        .map(Path::to_path_buf)
        .or_else(|| m.trajectory.clone())
        .ok_or_else(|| CliError::Usage("no trajectory: pass --trajectory or set measurement.trajectory".into()))?;
    let run = read_run::<T>(&dir, "velocity")?;
    if run.snapshots.is_empty() {
        return Err(CliError::Domain(format!("{} has no snapshots", dir.display())));
    }
    let series = synthesize(&m, &run.mesh, &run.snapshots)?;
    create_output_dir(out)?;
    series.save(out)?;
    let mut manifest = cfg.clone();
    manifest.measurement = Some(MeasurementSection { trajectory: Some(std::path::absolute(&dir)?), ..m });
    write_manifest(&manifest, out, command)?;
    println!(
        "{}: {} samples on {} measurement vertices{}",
        out.display(),
        series.times.len(),
        series.mesh.num_observed_vertices(),
        series.venc.map(|v| format!(", venc {v:.4} cm/s")).unwrap_or_default()
    );
    Ok(())
}
