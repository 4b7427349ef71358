use std::path::Path;

use ductflow::diagnostics::{interpolate_between_meshes, ErrorSeries};
use ductflow::mesh::Mesh;

use crate::error::CliError;
use crate::output::read_run;

fn same_mesh(a: &Mesh<f64>, b: &Mesh<f64>) -> bool {
    a.dim() == b.dim()
        && a.num_vertices() == b.num_vertices()
        && a.num_cells() == b.num_cells()
        && a.vertices().iter().zip(b.vertices()).all(|(p, q)| (0..3).all(|i| (p[i] - q[i]).abs() <= 1e-12))
        && (0..a.num_cells()).all(|c| a.cell(c) == b.cell(c))
}

fn on_stride(t: f64, stride: f64) -> bool {
    let k = (t / stride).round();
    k >= 1.0 && (t - k * stride).abs() <= 1e-9 * stride.max(t)
}

/// Error of `run_a` against the reference `run_b`, at common snapshot times that are
/// multiples of `stride`.
pub fn run(run_a: &Path, run_b: &Path, stride: f64, corrected: bool, output: &Path) -> Result<(), CliError> {
    if !(stride > 0.0) {
        return Err(CliError::Usage("--stride must be positive".into()));
    }
    let a = read_run::<f64>(run_a, if corrected { "velocity_corrected" } else { "velocity" })?;
    let b = read_run::<f64>(run_b, "velocity")?;
    let mut pairs = Vec::new();
    for (t, u) in &a.snapshots {
        if !on_stride(*t, stride) {
            continue;
        }
        if let Some((_, r)) = b.snapshots.iter().find(|(s, _)| (s - t).abs() <= 1e-9 * t.max(1.0)) {
            pairs.push((*t, u.clone(), r.clone()));
        }
    }
    if pairs.is_empty() {
        return Err(CliError::Domain(format!("no common snapshot times on a {stride} s stride")));
    }
    if !same_mesh(&a.mesh, &b.mesh) {
        let dim = a.mesh.dim();
        if dim != b.mesh.dim() {
            return Err(CliError::Domain("runs have meshes of different dimension".into()));
        }
        // Move whichever field can be located onto the other mesh.
        let onto_a: Result<Vec<_>, _> =
            pairs.iter().map(|(_, _, r)| interpolate_between_meshes(r, dim, &b.mesh, &a.mesh)).collect();
        match onto_a {
            Ok(rs) => pairs.iter_mut().zip(rs).for_each(|(p, r)| p.2 = r),
            Err(_) => {
                for p in pairs.iter_mut() {
                    p.1 = interpolate_between_meshes(&p.1, dim, &a.mesh, &b.mesh)?;
                }
            }
        }
    }
    let samples: Vec<(f64, &[f64])> = pairs.iter().map(|(t, u, _)| (*t, u.as_slice())).collect();
    let reference: Vec<&[f64]> = pairs.iter().map(|(_, _, r)| r.as_slice()).collect();
    let series = ErrorSeries::compare(&samples, &reference)?;
    series.write_csv(output)?;
    let mean = series.values.iter().sum::<f64>() / series.len() as f64;
    println!("{} samples: max eps_sq {:e}, mean eps_sq {:e}", series.len(), series.max(), mean);
    Ok(())
}
