//! Solver parameters and inflow waveforms.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::LinearSolverKind;
use crate::mesh::{INLET_TAG, WALL_TAG};

/// Time discretization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Coupled backward-Euler velocity-pressure solve.
    Monolithic,
    /// Chorin–Temam projection followed by a tentative velocity step.
    Fractional,
}

/// Physical constants (CGS), time step, coefficients and solver choice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rho: f64,
    pub mu: f64,
    pub tau: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub gamma_inlet: f64,
    pub gamma_tan: f64,
    pub gamma_p: f64,
    pub gamma_sd: f64,
    pub gamma_press: f64,
    pub backflow: bool,
    pub linear_solver: LinearSolverKind,
    /// Keep a field snapshot every this many steps (0 keeps none).
    pub snapshot_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 1.06,
            mu: 0.035,
            tau: 1e-3,
            t_end: 0.9,
            scheme: Scheme::Monolithic,
            gamma_inlet: 1e5,
            gamma_tan: 1e8,
            gamma_p: 1e-2,
            gamma_sd: 1.0,
            gamma_press: 0.0,
            backflow: true,
            linear_solver: LinearSolverKind::Direct,
            snapshot_every: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("rho", self.rho), ("mu", self.mu), ("tau", self.tau)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.t_end >= self.tau * (1.0 - 1e-9)) {
            return Err(Error::Config(format!("t_end ({}) must be at least tau ({})", self.t_end, self.tau)));
        }
        let nonneg = [
            ("gamma_inlet", self.gamma_inlet),
            ("gamma_tan", self.gamma_tan),
            ("gamma_p", self.gamma_p),
            ("gamma_sd", self.gamma_sd),
            ("gamma_press", self.gamma_press),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Number of time steps covering `[0, t_end]`.
    pub fn num_steps(&self) -> usize {
        (self.t_end / self.tau).round() as usize
    }

    /// Steps per interval of `seconds`, which must be a whole multiple of `tau`.
    pub fn steps_per(&self, seconds: f64) -> Result<usize> {
        let n = (seconds / self.tau).round();
        if n < 1.0 || (n * self.tau - seconds).abs() > 1e-9 * seconds.max(self.tau) {
            return Err(Error::Config(format!("interval {seconds} s is not a multiple of tau = {} s", self.tau)));
        }
        Ok(n as usize)
    }
}

/// Boundary roles of mesh tags other than outlets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryRoles {
    pub inlet_tag: i32,
    pub wall_tags: Vec<i32>,
}

impl Default for BoundaryRoles {
    fn default() -> Self {
        Self { inlet_tag: INLET_TAG, wall_tags: vec![WALL_TAG] }
    }
}

/// Time modulation `f(t)` of the inflow profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InletWaveform {
    /// `amplitude · ½(1 − cos(2πt / period))`.
    Cosine { period: f64, amplitude: f64 },
    Constant { value: f64 },
    /// Piecewise-linear samples, repeated with period `times.last − times.first`.
    Sampled { times: Vec<f64>, values: Vec<f64> },
}

impl Default for InletWaveform {
    fn default() -> Self {
        InletWaveform::Cosine { period: 0.9, amplitude: 1.0 }
    }
}

impl InletWaveform {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            InletWaveform::Cosine { period, amplitude } => {
                amplitude * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * t / period).cos())
            }
            InletWaveform::Constant { value } => *value,
            InletWaveform::Sampled { times, values } => {
                let (t0, t1) = (times[0], times[times.len() - 1]);
                let period = t1 - t0;
                let s = if period > 0.0 { t0 + (t - t0).rem_euclid(period) } else { t0 };
                let k = times.partition_point(|&x| x <= s).clamp(1, times.len() - 1);
                let (a, b) = (times[k - 1], times[k]);
                let w = if b > a { (s - a) / (b - a) } else { 0.0 };
                values[k - 1] + w * (values[k] - values[k - 1])
            }
        }
    }

    pub fn sampled(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::Config("sampled waveform needs at least two (t, f) pairs".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("waveform times must be strictly increasing".into()));
        }
        if times.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(Error::Config("waveform samples must be finite".into()));
        }
        Ok(InletWaveform::Sampled { times, values })
    }

    /// Reads `t,f` rows (an optional non-numeric header line is skipped).
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let (mut times, mut values) = (Vec::new(), Vec::new());
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: Option<(f64, f64)> = match fields.as_slice() {
                [a, b] => a.parse().ok().zip(b.parse().ok()),
                _ => None,
            };
            match parsed {
                Some((t, f)) => {
                    times.push(t);
                    values.push(f);
                }
                None if i == 0 => continue,
                None => {
                    return Err(Error::Parse { line: i + 1, message: format!("expected `t,f`, found {line:?}") })
                }
            }
        }
        Self::sampled(times, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_constants() {
        let c = SolverConfig::default();
        assert_eq!((c.rho, c.mu, c.gamma_inlet, c.gamma_tan), (1.06, 0.035, 1e5, 1e8));
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_time_window() {
        let c = SolverConfig { t_end: 1e-4, ..Default::default() };
        assert!(c.validate().is_err());
        let c = SolverConfig { tau: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn step_counts() {
        let c = SolverConfig { tau: 1e-3, t_end: 3e-3, ..Default::default() };
        assert_eq!(c.num_steps(), 3);
        assert_eq!(c.steps_per(0.03).unwrap(), 30);
        let c = SolverConfig { tau: 2.5e-3, ..Default::default() };
        assert_eq!(c.steps_per(0.03).unwrap(), 12);
        assert!(c.steps_per(0.031).is_err());
    }

    #[test]
    fn cosine_waveform() {
        let w = InletWaveform::default();
        assert!(w.value(0.0).abs() < 1e-15);
        assert!((w.value(0.45) - 1.0).abs() < 1e-15);
        assert!(w.value(0.9).abs() < 1e-15);
    }

    #[test]
    fn sampled_waveform_interpolates_and_repeats() {
        let w = InletWaveform::sampled(vec![0.0, 0.5, 1.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert!((w.value(0.25) - 1.0).abs() < 1e-15);
        assert!((w.value(1.25) - 1.0).abs() < 1e-12);
        assert!((w.value(0.75) - 1.0).abs() < 1e-15);
        assert!(InletWaveform::sampled(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn waveform_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        std::fs::write(&p, "t,f\n0,0\n0.5,1\n1,0\n").unwrap();
        let w = InletWaveform::from_csv(&p).unwrap();
        assert!((w.value(0.25) - 0.5).abs() < 1e-15);
        std::fs::write(&p, "t,f\n0,0\nx,1\n").unwrap();
        assert!(InletWaveform::from_csv(&p).is_err());
    }
}
