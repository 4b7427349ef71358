use std::fs;
use std::path::Path;
use std::sync::Arc;

use ductflow::diagnostics::EnergyLedger;
use ductflow::mesh::write_msh;
use ductflow::timestepping::{Scheme, TimeSeriesLog};
use ductflow::vtk::{write_vtk, PointField};
use ductflow::Real;

use crate::config::{Precision, RunConfig};
use crate::error::CliError;
use crate::output::{create_output_dir, snapshot_path, write_manifest, MESH_FILE, SNAPSHOT_DIR};

pub fn run(cfg: &RunConfig, out: &Path, command: &str) -> Result<(), CliError> {
    match cfg.precision {
        Precision::F32 => simulate::<f32>(cfg, out, command),
        Precision::F64 => simulate::<f64>(cfg, out, command),
    }
}

fn simulate<T: Real>(cfg: &RunConfig, out: &Path, command: &str) -> Result<(), CliError> {
    let mesh = Arc::new(cfg.build_mesh::<T>()?);
    let mut solver = cfg.build_solver(mesh.clone(), None)?;
    let waveform = cfg.waveform()?;
    create_output_dir(out)?;
    fs::create_dir_all(out.join(SNAPSHOT_DIR))?;
    write_msh(&mesh, out.join(MESH_FILE))?;

    let every = solver.config().snapshot_every;
    let steps = solver.config().num_steps();
    let mut log = TimeSeriesLog::new(solver.outlets().len());
    let mut ledger = EnergyLedger::new(&solver);
    let dim = mesh.dim();
    let state = solver.initial_state()?;
    let mut count = 0usize;
    let last = solver.advance(state, steps, &waveform, |solver, prev, next| {
        count += 1;
        log.push(solver.record(next));
        ledger.record(solver, prev, next, &waveform);
        if every > 0 && count % every == 0 {
            let mut fields = vec![PointField::new("velocity", dim, &next.u)];
            if solver.config().scheme == Scheme::Fractional {
                let uc = solver.corrected_velocity(next)?;
                fields.push(PointField::new("velocity_corrected", dim, &uc));
            }
            fields.push(PointField::new("pressure", 1, &next.p));
            write_vtk(solver.mesh(), Some(next.t.to_f64_lossy()), &fields, snapshot_path(out, count))?;
        }
        Ok(())
    })?;
    log.write_csv(out.join("timeseries.csv"))?;
    ledger.write_csv(out.join("energy.csv"))?;
    write_manifest(cfg, out, command)?;
    log::info!("finished at t = {} after {count} steps", last.t.to_f64_lossy());
    println!("{}: {count} steps, {} snapshots", out.display(), if every > 0 { count / every } else { 0 });
    Ok(())
}
