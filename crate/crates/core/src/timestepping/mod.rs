//! Monolithic backward-Euler and Chorin–Temam fractional-step time marching.

mod config;
mod log;
mod solver;

pub use config::{BoundaryRoles, InletWaveform, Scheme, SolverConfig};
pub use log::{LogRecord, TimeSeriesLog};
pub use solver::{corrected_velocity, FlowSolver, RunOutput, Snapshot, StepTerms};
