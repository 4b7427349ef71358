use std::fs;
use std::path::Path;
use std::sync::Arc;

use ductflow::measure::MeasurementSeries;
use ductflow::roukf::{run_estimation, EstimationSetup, ParameterMap};
use ductflow::Real;

use crate::commands::synth_meas::synthesize;
use crate::config::{Precision, RunConfig};
use crate::error::CliError;
use crate::output::{create_output_dir, write_manifest};

pub fn run(cfg: &RunConfig, out: &Path, command: &str) -> Result<(), CliError> {
    match cfg.precision {
        Precision::F32 => estimate::<f32>(cfg, out, command),
        Precision::F64 => estimate::<f64>(cfg, out, command),
    }
}

fn estimate<T: Real>(cfg: &RunConfig, out: &Path, command: &str) -> Result<(), CliError> {
    let e = cfg.estimation.as_ref().ok_or_else(|| CliError::Usage("estimate needs an [estimation] section".into()))?;
    let positions = cfg.duct_positions(&e.estimated_tags)?;
    let mesh = Arc::new(cfg.build_mesh::<T>()?);
    cfg.check_tags(&mesh)?;
    let waveform = cfg.waveform()?;
    let p = positions.len();
    let initial = e.initial_cm.clone().unwrap_or_else(|| vec![e.baseline_cm; p]);
    let mut lengths = cfg.duct_lengths();
    for (k, &i) in positions.iter().enumerate() {
        lengths[i] = initial[k];
    }
    create_output_dir(out)?;

    let mut reference = e.reference_cm.clone();
    let series: MeasurementSeries<T> = match &e.measurements {
        Some(dir) => MeasurementSeries::load(dir)?,
        None => {
            let truth = cfg.twin_lengths()?;
            let m = cfg.measurement.clone().unwrap_or_default();
            let mut twin = cfg.clone();
            twin.solver.snapshot_every_s = m.cadence_s;
            twin.validate()?;
            let mut solver = twin.build_solver(mesh.clone(), Some(&truth))?;
            let run = solver.run(&waveform, None)?;
            let snapshots: Vec<(f64, Vec<T>)> =
                run.snapshots.into_iter().map(|s| (s.state.t.to_f64_lossy(), s.state.u)).collect();
            let series = synthesize(&m, &mesh, &snapshots)?;
            series.save(out.join("measurements"))?;
            reference.get_or_insert_with(|| positions.iter().map(|&i| truth[i]).collect());
            series
        }
    };

    let map = ParameterMap::new(lengths.clone(), positions, vec![e.baseline_cm; p])?;
    let beta0 = map.beta_of(&lengths);
    let setup = EstimationSetup {
        map,
        beta0,
        std0: vec![e.initial_std; p],
        sigma_obs: e.sigma_obs_cm_s,
        resync: e.resync,
        reference_cm: reference,
    };
    let solver = cfg.build_solver(mesh, Some(&lengths))?;
    let report = run_estimation(solver, waveform, &series, &setup)?;
    report.write_csv(out.join("estimation.csv"))?;
    let table = report.summary_table();
    fs::write(out.join("summary.txt"), &table)?;
    write_manifest(cfg, out, command)?;
    print!("{table}");
    Ok(())
}
