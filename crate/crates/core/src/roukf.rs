//! Reduced-order unscented Kalman filter for the duct lengths.
//!
//! Uncertainty lives only on the parameters `β` (lengths `ℓ = ℓ⁰ 2^β`). Each sigma
//! particle is an independent forward solver; the correction is the simplex ROUKF update.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::FieldState;
use crate::error::{Error, Result};
use crate::linalg::dense::DenseMatrix;
use crate::measure::{snr_sigma, MeasurementSeries, NoiseModel, ObservationOperator};
use crate::scalar::Real;
use crate::timestepping::{FlowSolver, InletWaveform};

pub const DEFAULT_INITIAL_STD: f64 = 0.5;

/// `p + 1` simplex directions `ξ_i` with weights `1/(p+1)`, zero weighted mean and identity
/// weighted covariance.
pub fn simplex_sigma_points(p: usize) -> Result<Vec<Vec<f64>>> {
    if p == 0 {
        return Err(Error::InvalidInput("at least one parameter is needed".into()));
    }
    // columns 1..=p of the Helmert matrix are orthonormal and orthogonal to the constant vector
    let scale = ((p + 1) as f64).sqrt();
    let mut pts = vec![vec![0.0; p]; p + 1];
    for k in 1..=p {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for (i, pt) in pts.iter_mut().enumerate() {
            pt[k - 1] = scale
                * if i < k {
                    1.0 / norm
                } else if i == k {
                    -(k as f64) / norm
                } else {
                    0.0
                };
        }
    }
    Ok(pts)
}

/// Maps `β` on the estimated ducts to the full list of duct lengths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterMap {
    /// Lengths of all ducts (cm); entries not estimated stay at these values.
    pub lengths_cm: Vec<f64>,
    /// Positions in `lengths_cm` that are estimated.
    pub estimated: Vec<usize>,
    /// Baseline `ℓ⁰` for each estimated duct (cm).
    pub baseline_cm: Vec<f64>,
}

impl ParameterMap {
    pub fn new(lengths_cm: Vec<f64>, estimated: Vec<usize>, baseline_cm: Vec<f64>) -> Result<Self> {
        if estimated.is_empty() || estimated.len() != baseline_cm.len() {
            return Err(Error::InvalidInput("one baseline length per estimated duct is required".into()));
        }
        for (k, &i) in estimated.iter().enumerate() {
            if i >= lengths_cm.len() {
                return Err(Error::InvalidInput(format!("estimated duct index {i} out of range")));
            }
            if estimated[..k].contains(&i) {
                return Err(Error::InvalidInput(format!("duct {i} estimated twice")));
            }
        }
        if let Some(b) = baseline_cm.iter().chain(&lengths_cm).find(|&&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidInput(format!("lengths must be positive, got {b}")));
        }
        Ok(Self { lengths_cm, estimated, baseline_cm })
    }

    pub fn dim(&self) -> usize {
        self.estimated.len()
    }

    /// Estimated lengths `ℓ⁰ 2^β`, kept positive and finite for any finite `β`.
    pub fn estimated_lengths(&self, beta: &[f64]) -> Vec<f64> {
        self.baseline_cm.iter().zip(beta).map(|(l0, b)| (l0 * b.exp2()).clamp(f64::MIN_POSITIVE, f64::MAX)).collect()
    }

    /// All duct lengths for parameters `beta`.
    pub fn lengths(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = self.lengths_cm.clone();
        for (&i, l) in self.estimated.iter().zip(self.estimated_lengths(beta)) {
            out[i] = l;
        }
        out
    }

    /// `β` such that the estimated lengths equal `lengths`.
    pub fn beta_of(&self, lengths: &[f64]) -> Vec<f64> {
        lengths.iter().zip(&self.baseline_cm).map(|(l, l0)| (l / l0).log2()).collect()
    }
}

/// How particle field states restart after a correction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resync {
    /// Particles restart from the corrected mean state plus their state sensitivity.
    #[default]
    Sensitivity,
    /// Every particle restarts from the corrected mean state.
    MeanState,
}

/// Filter estimate after a number of corrections.
#[derive(Clone, Debug)]
pub struct FilterState<T> {
    pub beta: Vec<f64>,
    /// Lower-triangular square-root factor of the parameter covariance.
    pub l: DenseMatrix<f64>,
    /// Corrected mean field state.
    pub mean: FieldState<T>,
    /// State sensitivity to the reduced parameter directions (one velocity field each).
    pub sensitivity: Vec<Vec<f64>>,
    pub sigma_obs: f64,
    pub step: usize,
}

impl<T> FilterState<T> {
    /// Standard deviations of `β` (square roots of the covariance diagonal).
    pub fn std(&self) -> Vec<f64> {
        let n = self.l.n;
        (0..n).map(|i| (0..n).map(|j| self.l[(i, j)].powi(2)).sum::<f64>().sqrt()).collect()
    }
}

/// Particle parameters, final states and their observations over one window.
#[derive(Clone, Debug)]
pub struct Forecast<T> {
    pub betas: Vec<Vec<f64>>,
    pub finals: Vec<FieldState<T>>,
    pub observations: Vec<Vec<f64>>,
}

impl<T> Forecast<T> {
    /// Weighted mean of the particle observations.
    pub fn mean_observation(&self) -> Vec<f64> {
        let alpha = 1.0 / self.observations.len() as f64;
        let mut out = vec![0.0; self.observations.first().map_or(0, |o| o.len())];
        for o in &self.observations {
            for (a, x) in out.iter_mut().zip(o) {
                *a += alpha * x;
            }
        }
        out
    }
}

/// Parameter filter driving one forward solver per sigma particle.
pub struct Roukf<T: Real> {
    particles: Vec<FlowSolver<T>>,
    map: ParameterMap,
    obs: ObservationOperator,
    waveform: InletWaveform,
    resync: Resync,
    xi: Vec<Vec<f64>>,
    pub state: FilterState<T>,
}

impl<T: Real> Roukf<T> {
    /// Starts from `beta0` with independent standard deviations `std0`, the forward model
    /// at rest at `t = 0`.
    pub fn new(
        solver: FlowSolver<T>,
        waveform: InletWaveform,
        map: ParameterMap,
        obs: ObservationOperator,
        beta0: Vec<f64>,
        std0: &[f64],
        sigma_obs: f64,
        resync: Resync,
    ) -> Result<Self> {
        let p = map.dim();
        if beta0.len() != p || std0.len() != p {
            return Err(Error::InvalidInput(format!("expected {p} initial parameters and deviations")));
        }
        if std0.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidInput("initial deviations must be positive".into()));
        }
        if !(sigma_obs > 0.0) {
            return Err(Error::InvalidInput(format!("observation noise must be positive, got {sigma_obs}")));
        }
        if obs.matrix().ncols() != solver.dofs().n_u() {
            return Err(Error::InvalidInput("observation operator does not match the solver mesh".into()));
        }
        let mut solver = solver;
        solver.set_lengths(&map.lengths(&beta0))?;
        let mean = solver.initial_state()?;
        let n_u = solver.dofs().n_u();
        let particles = vec![solver; p + 1];
        Ok(Self {
            particles,
            map,
            obs,
            waveform,
            resync,
            xi: simplex_sigma_points(p)?,
            state: FilterState {
                beta: beta0,
                l: DenseMatrix::diagonal(std0),
                mean,
                sensitivity: vec![vec![0.0; n_u]; p],
                sigma_obs,
                step: 0,
            },
        })
    }

    pub fn map(&self) -> &ParameterMap {
        &self.map
    }

    pub fn observation(&self) -> &ObservationOperator {
        &self.obs
    }

    /// Current estimated lengths.
    pub fn lengths(&self) -> Vec<f64> {
        self.map.estimated_lengths(&self.state.beta)
    }

    /// Propagates the particles to `t_meas` and assimilates the observed values `z`.
    pub fn filter_step(&mut self, t_meas: f64, z: &[f64]) -> Result<()> {
        let forecast = self.forecast(t_meas)?;
        self.correct(forecast, z)
    }

    /// Sigma particles advanced from the current estimate to `t_meas`.
    pub fn forecast(&mut self, t_meas: f64) -> Result<Forecast<T>> {
        let tau = self.particles[0].config().tau;
        let t0 = self.state.mean.t.to_f64_lossy();
        let steps = ((t_meas - t0) / tau).round();
        if steps < 1.0 || (steps * tau - (t_meas - t0)).abs() > 1e-6 * tau {
            return Err(Error::InvalidInput(format!(
                "measurement at t = {t_meas} s is not a later point of the {tau} s step grid"
            )));
        }
        let steps = steps as usize;
        let betas: Vec<Vec<f64>> = self
            .xi
            .iter()
            .map(|xi| self.state.beta.iter().zip(self.state.l.mul_vec(xi)).map(|(b, d)| b + d).collect())
            .collect();
        let starts: Vec<Vec<T>> = self
            .xi
            .iter()
            .map(|xi| {
                let mut u = self.state.mean.u.clone();
                if self.resync == Resync::Sensitivity {
                    for (j, s) in self.state.sensitivity.iter().enumerate() {
                        for (x, d) in u.iter_mut().zip(s) {
                            *x += T::lit(d * xi[j]);
                        }
                    }
                }
                u
            })
            .collect();
        let map = &self.map;
        let waveform = &self.waveform;
        let mean_t = self.state.mean.t;
        let finals: Vec<Result<FieldState<T>>> = self
            .particles
            .par_iter_mut()
            .zip(betas.par_iter())
            .zip(starts.into_par_iter())
            .enumerate()
            .map(|(i, ((solver, beta), u0))| {
                let run = || -> Result<FieldState<T>> {
                    solver.set_lengths(&map.lengths(beta))?;
                    let mut s = solver.prepare_state(u0)?;
                    s.t = mean_t;
                    solver.advance(s, steps, waveform, |_, _, _| Ok(()))
                };
                run().map_err(|e| Error::ParticleFailed { particle: i, beta: beta.clone(), source: Box::new(e) })
            })
            .collect();
        let finals: Vec<FieldState<T>> = finals.into_iter().collect::<Result<_>>()?;
        let observations = finals.iter().map(|s| self.obs.apply(&s.u)).collect();
        Ok(Forecast { betas, finals, observations })
    }

    /// Simplex correction of the parameters and the mean state from a forecast.
    pub fn correct(&mut self, forecast: Forecast<T>, z: &[f64]) -> Result<()> {
        if z.len() != self.obs.num_observations() {
            return Err(Error::InvalidInput(format!(
                "measurement has {} values, expected {}",
                z.len(),
                self.obs.num_observations()
            )));
        }
        let Forecast { betas, finals, observations } = forecast;
        let p = self.map.dim();
        let alpha = 1.0 / (p + 1) as f64;
        // innovations and their reduced sensitivity HL = Σ α Γ_i ξ_iᵀ
        let gammas: Vec<Vec<f64>> =
            observations.iter().map(|h| h.iter().zip(z).map(|(h, m)| h - m).collect()).collect();
        let m = z.len();
        let mut mean_gamma = vec![0.0; m];
        let mut hl = vec![vec![0.0; m]; p];
        for (g, xi) in gammas.iter().zip(&self.xi) {
            for k in 0..m {
                mean_gamma[k] += alpha * g[k];
            }
            for j in 0..p {
                let w = alpha * xi[j];
                for k in 0..m {
                    hl[j][k] += w * g[k];
                }
            }
        }
        let inv_var = 1.0 / (self.state.sigma_obs * self.state.sigma_obs);
        let mut u_mat = DenseMatrix::identity(p);
        for a in 0..p {
            for b in 0..p {
                u_mat[(a, b)] += inv_var * dot(&hl[a], &hl[b]);
            }
        }
        let u_inv = u_mat.spd_inverse()?;
        let rhs: Vec<f64> = hl.iter().map(|h| -inv_var * dot(h, &mean_gamma)).collect();
        let delta = u_inv.mul_vec(&rhs);

        // β̂ and the mean state move along their sensitivities
        let beta_mean: Vec<f64> = (0..p).map(|j| betas.iter().map(|b| alpha * b[j]).sum()).collect();
        let l_delta = self.state.l.mul_vec(&delta);
        let beta: Vec<f64> = beta_mean.iter().zip(&l_delta).map(|(b, d)| b + d).collect();
        let n_u = finals[0].u.len();
        let mut mean_u = vec![0.0; n_u];
        let mut sens = vec![vec![0.0; n_u]; p];
        for (s, xi) in finals.iter().zip(&self.xi) {
            for (k, x) in s.u.iter().enumerate() {
                let x = x.to_f64_lossy();
                mean_u[k] += alpha * x;
                for j in 0..p {
                    sens[j][k] += alpha * xi[j] * x;
                }
            }
        }
        for j in 0..p {
            for k in 0..n_u {
                mean_u[k] += sens[j][k] * delta[j];
            }
        }
        let c = u_inv.cholesky()?;
        let l = self.state.l.matmul(&c);
        let sensitivity: Vec<Vec<f64>> = (0..p)
            .map(|j| (0..n_u).map(|k| (0..p).map(|a| sens[a][k] * c[(a, j)]).sum()).collect())
            .collect();
        let cond = l.matmul(&l.transpose()).condition_estimate();
        if !cond.is_finite() || cond > 1e12 {
            log::warn!("parameter covariance is close to singular (condition estimate {cond:e})");
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("filter correction produced non-finite parameters".into()));
        }

        let mut mean = FieldState { u: mean_u.into_iter().map(T::lit).collect(), p: Vec::new(), t: finals[0].t };
        // pressure of the restart state under the corrected lengths
        let lead = &mut self.particles[0];
        lead.set_lengths(&self.map.lengths(&beta))?;
        let t = mean.t;
        mean = lead.prepare_state(mean.u)?;
        mean.t = t;
        self.state = FilterState {
            beta,
            l,
            mean,
            sensitivity,
            sigma_obs: self.state.sigma_obs,
            step: self.state.step + 1,
        };
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Noise level to assume for a measurement series: the generated noise when it is known,
/// else 5% of the largest measured speed.
pub fn default_sigma_obs<T: Real>(series: &MeasurementSeries<T>) -> f64 {
    let dim = series.dim();
    let peak_speed = series
        .samples
        .iter()
        .flat_map(|s| s.chunks(dim).map(|c| c.iter().map(|x| x.to_f64_lossy().powi(2)).sum::<f64>().sqrt()))
        .fold(0.0, f64::max);
    match &series.noise {
        NoiseModel::Phase { snr_db, .. } if snr_sigma(*snr_db) > 0.0 => {
            snr_sigma(*snr_db) * series.venc.unwrap_or(0.0) / std::f64::consts::PI
        }
        NoiseModel::Additive { relative_std, .. } if *relative_std > 0.0 => {
            // the additive noise was scaled with the clean peak speed, close to the measured one
            relative_std * peak_speed
        }
        _ => 0.05 * peak_speed,
    }
}

/// Estimation settings.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimationSetup {
    pub map: ParameterMap,
    pub beta0: Vec<f64>,
    pub std0: Vec<f64>,
    /// Observation noise std (cm/s); derived from the series when absent.
    pub sigma_obs: Option<f64>,
    pub resync: Resync,
    /// True lengths of the estimated ducts, for error reporting.
    pub reference_cm: Option<Vec<f64>>,
}

/// Per-measurement trajectory of the estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimationReport {
    pub times: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
    pub lengths: Vec<Vec<f64>>,
    /// Outlet position (1-based, duct order) of each estimated parameter.
    pub outlets: Vec<usize>,
    pub reference_cm: Option<Vec<f64>>,
    pub sigma_obs: f64,
}

impl EstimationReport {
    pub fn final_lengths(&self) -> &[f64] {
        self.lengths.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// `(ℓ − ℓ_ref)/ℓ_ref` per parameter, if a reference is known.
    pub fn relative_errors(&self) -> Option<Vec<f64>> {
        let r = self.reference_cm.as_ref()?;
        Some(self.final_lengths().iter().zip(r).map(|(l, lr)| (l - lr) / lr).collect())
    }

    pub fn write_csv_to<W: Write>(&self, mut w: W) -> Result<()> {
        let p = self.outlets.len();
        let cols: Vec<String> = ["beta", "std", "ell"]
            .iter()
            .flat_map(|n| (1..=p).map(move |k| format!("{n}_{k}")))
            .collect();
        writeln!(w, "t,{}", cols.join(","))?;
        for i in 0..self.times.len() {
            write!(w, "{:e}", self.times[i])?;
            for x in self.beta[i].iter().chain(&self.std[i]).chain(&self.lengths[i]) {
                write!(w, ",{x:e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    /// Reference, estimate and relative error per parameter.
    pub fn summary_table(&self) -> String {
        let mut s = String::from("outlet  reference_cm  estimate_cm  rel_error\n");
        let errs = self.relative_errors();
        for (k, l) in self.final_lengths().iter().enumerate() {
            let (r, e) = match (&self.reference_cm, &errs) {
                (Some(r), Some(e)) => (format!("{:.4}", r[k]), format!("{:+.3}%", 100.0 * e[k])),
                _ => ("-".into(), "-".into()),
            };
            s.push_str(&format!("{:<6}  {:>12}  {:>11.4}  {:>9}\n", self.outlets[k], r, l, e));
        }
        s
    }
}

/// Assimilates every sample of `series` in time order.
pub fn run_estimation<T: Real>(
    solver: FlowSolver<T>,
    waveform: InletWaveform,
    series: &MeasurementSeries<T>,
    setup: &EstimationSetup,
) -> Result<EstimationReport> {
    if series.dim() != solver.mesh().dim() {
        return Err(Error::InvalidInput("measurement mesh dimension differs from the flow mesh".into()));
    }
    if let Some(r) = &setup.reference_cm {
        if r.len() != setup.map.dim() {
            return Err(Error::InvalidInput("one reference length per estimated duct is required".into()));
        }
    }
    let obs = ObservationOperator::new(solver.mesh(), &series.mesh)
        .map_err(|e| Error::InvalidInput(format!("incompatible measurement mesh: {e}")))?;
    let sigma_obs = setup.sigma_obs.unwrap_or_else(|| default_sigma_obs(series));
    let mut filter = Roukf::new(
        solver,
        waveform,
        setup.map.clone(),
        obs,
        setup.beta0.clone(),
        &setup.std0,
        sigma_obs,
        setup.resync,
    )?;
    let mut report = EstimationReport {
        times: vec![0.0],
        beta: vec![filter.state.beta.clone()],
        std: vec![filter.state.std()],
        lengths: vec![filter.lengths()],
        outlets: setup.map.estimated.iter().map(|i| i + 1).collect(),
        reference_cm: setup.reference_cm.clone(),
        sigma_obs,
    };
    for (t, sample) in series.times.iter().zip(&series.samples) {
        let z = filter.observation().select(sample);
        filter.filter_step(*t, &z)?;
        report.times.push(*t);
        report.beta.push(filter.state.beta.clone());
        report.std.push(filter.state.std());
        report.lengths.push(filter.lengths());
        log::info!("t = {t:.3} s, lengths {:?}", filter.lengths());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::dubc::{OutletKind, OutletSpec};
    use crate::measure::{synthesize_series, MeasurementMesh};
    use crate::mesh::outlet_tag;
    use crate::timestepping::{BoundaryRoles, Scheme, SolverConfig};

    fn weighted_moments(pts: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let p = pts[0].len();
        let a = 1.0 / pts.len() as f64;
        let mut mean = vec![0.0; p];
        let mut cov = vec![vec![0.0; p]; p];
        for x in pts {
            for i in 0..p {
                mean[i] += a * x[i];
                for j in 0..p {
                    cov[i][j] += a * x[i] * x[j];
                }
            }
        }
        (mean, cov)
    }

    #[test]
    fn one_parameter_simplex_is_plus_minus_one() {
        let pts = simplex_sigma_points(1).unwrap();
        assert_eq!(pts.len(), 2);
        assert!((pts[0][0] - 1.0).abs() < 1e-15 && (pts[1][0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn simplex_has_zero_mean_and_unit_covariance() {
        for p in 1..=16 {
            let pts = simplex_sigma_points(p).unwrap();
            assert_eq!(pts.len(), p + 1);
            let (mean, cov) = weighted_moments(&pts);
            assert!(mean.iter().all(|m| m.abs() < 1e-14), "p = {p}: {mean:?}");
            for i in 0..p {
                for j in 0..p {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((cov[i][j] - want).abs() < 1e-12, "p = {p}");
                }
            }
        }
        assert!(simplex_sigma_points(0).is_err());
    }

    #[test]
    fn parameter_map_keeps_lengths_positive() {
        let map = ParameterMap::new(vec![1.0, 2.0, 3.0], vec![2, 0], vec![2.8, 2.8]).unwrap();
        for b in [-60.0, -1.0, 0.0, 3.5, 60.0] {
            assert!(map.lengths(&[b, -b]).iter().all(|&l| l > 0.0));
        }
        let l = map.lengths(&[1.0, -1.0]);
        assert_eq!(l, vec![1.4, 2.0, 5.6]);
        let beta = map.beta_of(&[1.5, 4.0]);
        assert!(map.estimated_lengths(&beta).iter().zip([1.5, 4.0]).all(|(a, b)| (a - b).abs() < 1e-14));
        assert!(ParameterMap::new(vec![1.0], vec![1], vec![1.0]).is_err());
        assert!(ParameterMap::new(vec![1.0, 1.0], vec![0, 0], vec![1.0, 1.0]).is_err());
        assert!(ParameterMap::new(vec![1.0], vec![0], vec![0.0]).is_err());
    }

    const WAVEFORM: InletWaveform = InletWaveform::Cosine { period: 0.9, amplitude: 1.0 };

    // with a single outlet the velocity does not depend on the duct length
    fn bifurcation_solver(l1: f64) -> FlowSolver<f64> {
        let mesh = Arc::new(crate::mesh::generate_bifurcation::<f64>(2.0, 2.0, 1.0, 2).unwrap());
        let outlets = [(1, l1), (2, 3.0)]
            .iter()
            .map(|&(k, l)| OutletSpec::new(&mesh, outlet_tag(k), OutletKind::Duct { length_cm: l }, 1e-8).unwrap())
            .collect();
        let config = SolverConfig { tau: 5e-3, t_end: 0.6, scheme: Scheme::Fractional, snapshot_every: 6, ..Default::default() };
        FlowSolver::new(mesh, BoundaryRoles::default(), outlets, config).unwrap()
    }

    fn twin_series(length: f64) -> MeasurementSeries<f64> {
        let mut solver = bifurcation_solver(length);
        let out = solver.run(&WAVEFORM, None).unwrap();
        let traj: Vec<(f64, &[f64])> = out.snapshots.iter().map(|s| (s.state.t, s.state.u.as_slice())).collect();
        let meas = MeasurementMesh::from_domain(solver.mesh());
        synthesize_series(&traj, solver.mesh(), &meas, 0.03, NoiseModel::None).unwrap()
    }

    fn filter_with(beta0: f64, sigma_obs: f64, resync: Resync) -> Roukf<f64> {
        let solver = bifurcation_solver(1.0);
        let meas = MeasurementMesh::from_domain(solver.mesh());
        let obs = ObservationOperator::new(solver.mesh(), &meas).unwrap();
        let map = ParameterMap::new(vec![1.0, 3.0], vec![0], vec![2.0]).unwrap();
        Roukf::new(solver, WAVEFORM, map, obs, vec![beta0], &[0.5], sigma_obs, resync).unwrap()
    }

    fn filter(beta0: f64, sigma_obs: f64) -> Roukf<f64> {
        filter_with(beta0, sigma_obs, Resync::default())
    }

    #[test]
    fn infinite_noise_leaves_the_estimate_unchanged() {
        let series = twin_series(1.0);
        for resync in [Resync::Sensitivity, Resync::MeanState] {
            let mut f = filter_with(0.3, 1e30, resync);
            for (t, sample) in series.times.iter().zip(&series.samples).take(2) {
                let z = f.observation().select(sample);
                f.filter_step(*t, &z).unwrap();
            }
            assert!((f.state.beta[0] - 0.3).abs() < 1e-10);
            assert!((f.state.l[(0, 0)] - 0.5).abs() < 1e-10);
            assert_eq!(f.state.step, 2);
        }
    }

    #[test]
    fn zero_innovation_leaves_the_parameters_unchanged() {
        let mut f = filter(0.3, 0.1);
        let forecast = f.forecast(0.03).unwrap();
        let z = forecast.mean_observation();
        f.correct(forecast, &z).unwrap();
        assert!((f.state.beta[0] - 0.3).abs() < 1e-12);
        assert!(f.state.l[(0, 0)] < 0.5);
    }

    #[test]
    fn measurement_times_must_follow_the_step_grid() {
        let mut f = filter(0.0, 0.1);
        assert!(f.forecast(0.0).is_err());
        assert!(f.forecast(0.0312).is_err());
        let n = f.observation().num_observations();
        assert!(f.filter_step(0.03, &vec![0.0; n + 1]).is_err());
    }

    fn setup(beta0: f64) -> EstimationSetup {
        EstimationSetup {
            map: ParameterMap::new(vec![2.0, 3.0], vec![0], vec![2.0]).unwrap(),
            beta0: vec![beta0],
            std0: vec![DEFAULT_INITIAL_STD],
            sigma_obs: None,
            resync: Resync::default(),
            reference_cm: Some(vec![1.0]),
        }
    }

    #[test]
    fn starting_at_the_truth_stays_there() {
        let series = twin_series(1.0);
        let mut s = setup(-1.0);
        s.std0 = vec![0.1];
        let report = run_estimation(bifurcation_solver(2.0), WAVEFORM, &series, &s).unwrap();
        assert_eq!(report.times.len(), series.times.len() + 1);
        for l in &report.lengths {
            assert!((l[0] - 1.0).abs() < 0.01, "{l:?}");
        }
    }

    #[test]
    fn estimate_moves_towards_the_truth() {
        let series = twin_series(1.0);
        let report = run_estimation(bifurcation_solver(2.0), WAVEFORM, &series, &setup(0.0)).unwrap();
        let err: Vec<f64> = report.lengths.iter().map(|l| (l[0] - 1.0).abs()).collect();
        let tenth = err.len() / 10;
        assert!(err[tenth..].iter().all(|&e| e <= err[tenth]), "{err:?}");
        assert!(*err.last().unwrap() < 0.1, "{err:?}");
        let std = &report.std;
        assert!(std.windows(2).all(|w| w[1][0] <= w[0][0]));
    }

    #[test]
    fn estimation_is_deterministic_and_reports_csv() {
        let series = twin_series(1.0);
        let a = run_estimation(bifurcation_solver(2.0), WAVEFORM, &series, &setup(0.0)).unwrap();
        let b = run_estimation(bifurcation_solver(2.0), WAVEFORM, &series, &setup(0.0)).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_csv_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,beta_1,std_1,ell_1\n"));
        assert_eq!(text.lines().count(), a.times.len() + 1);
        assert!(a.summary_table().contains("reference_cm"));
    }
}
