//! Error norms, cross-mesh interpolation and the discrete energy balance.

use std::io::Write;
use std::path::Path;

use crate::assembly::{assemble_stiffness, Field, FieldState};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{Mesh, PointLocator};
use crate::scalar::Real;
use crate::timestepping::{FlowSolver, InletWaveform, Scheme};

/// Squared relative discrepancy `Σ|u_i − r_i|² / Σ|r_i|²` over all nodal values.
pub fn relative_l2<T: Real>(u: &[T], reference: &[T]) -> Result<f64> {
    if u.len() != reference.len() {
        return Err(Error::InvalidInput(format!(
            "field lengths differ: {} vs {}",
            u.len(),
            reference.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, r) in u.iter().zip(reference) {
        let (a, r) = (a.to_f64_lossy(), r.to_f64_lossy());
        num += (a - r) * (a - r);
        den += r * r;
    }
    if !(den > 0.0) {
        return Err(Error::InvalidInput("reference field has zero norm".into()));
    }
    Ok(num / den)
}

/// Sampled error history.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ErrorSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, eps: f64) {
        self.times.push(t);
        self.values.push(eps);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Pairs snapshots by index and compares them with the reference.
    pub fn compare<T: Real>(samples: &[(f64, &[T])], reference: &[&[T]]) -> Result<Self> {
        if samples.len() != reference.len() {
            return Err(Error::InvalidInput(format!(
                "{} samples but {} reference snapshots",
                samples.len(),
                reference.len()
            )));
        }
        let mut s = Self::new();
        for ((t, u), r) in samples.iter().zip(reference) {
            s.push(*t, relative_l2(u, r)?);
        }
        Ok(s)
    }

    pub fn write_csv_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,eps_sq")?;
        for (t, e) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t:e},{e:e}")?;
        }
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// Evaluates a nodal field with `ncomp` interleaved components of `src` at the vertices of
/// `dst`. Destination vertices outside `src` by more than `1e-8` of a cell are an error.
pub fn interpolate_between_meshes<T: Real>(
    values: &[T],
    ncomp: usize,
    src: &Mesh<T>,
    dst: &Mesh<T>,
) -> Result<Vec<T>> {
    if values.len() != src.num_vertices() * ncomp {
        return Err(Error::InvalidInput(format!(
            "field has {} values, expected {}",
            values.len(),
            src.num_vertices() * ncomp
        )));
    }
    let locator = PointLocator::new(src);
    let slack = T::lit(1e-8);
    let mut out = vec![T::zero(); dst.num_vertices() * ncomp];
    for (v, p) in dst.vertices().iter().enumerate() {
        let at = locator.locate_with_slack(p, slack).ok_or_else(|| Error::PointLocation {
            x: p[0].to_f64_lossy(),
            y: p[1].to_f64_lossy(),
            z: p[2].to_f64_lossy(),
        })?;
        locator.interpolate(&at, values, ncomp, &mut out[v * ncomp..(v + 1) * ncomp]);
    }
    Ok(out)
}

/// One named contribution to the energy balance, as a rate. The balance reads
/// `ΔE/τ = −Σ value`.
#[derive(Clone, Debug, PartialEq)]
pub struct LedgerTerm {
    pub name: &'static str,
    pub value: f64,
    /// Nonnegative by construction.
    pub dissipative: bool,
    /// Weight of the term in the stability estimate `ΔE/τ + Σ weight·value ≤ 0`.
    pub weight: f64,
}

fn term(name: &'static str, value: f64, dissipative: bool, weight: f64) -> LedgerTerm {
    LedgerTerm { name, value, dissipative, weight }
}

/// Energy balance of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct LedgerRecord {
    pub t: f64,
    pub energy: f64,
    /// `(E^{k+1} − E^k)/τ`.
    pub rate: f64,
    pub terms: Vec<LedgerTerm>,
    /// `|rate + Σ terms|`.
    pub residual: f64,
    /// `rate + Σ weight·value`: zero up to round-off for the monolithic scheme, and
    /// nonpositive whenever the stability estimate of the fractional scheme holds.
    pub signed_sum: f64,
}

impl LedgerRecord {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }

    /// Largest term magnitude, for relative residuals.
    pub fn scale(&self) -> f64 {
        self.terms.iter().map(|t| t.value.abs()).fold(self.rate.abs(), f64::max)
    }
}

/// Evaluates the discrete energy balance of consecutive states of a solver.
pub struct EnergyLedger {
    pressure_laplacian: Option<CsrMatrix<f64>>,
    pub records: Vec<LedgerRecord>,
}

fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

impl EnergyLedger {
    pub fn new<T: Real>(solver: &FlowSolver<T>) -> Self {
        let pressure_laplacian = (solver.config().scheme == Scheme::Fractional).then(|| {
            let k = assemble_stiffness(solver.mesh(), solver.dofs(), Field::Scalar, T::one());
            k.cast()
        });
        Self { pressure_laplacian, records: Vec::new() }
    }

    /// Balance of the step `prev → next` and appends it to `records`.
    pub fn record<T: Real>(
        &mut self,
        solver: &FlowSolver<T>,
        prev: &FieldState<T>,
        next: &FieldState<T>,
        waveform: &InletWaveform,
    ) -> &LedgerRecord {
        let r = self.evaluate(solver, prev, next, waveform);
        self.records.push(r);
        self.records.last().unwrap()
    }

    pub fn evaluate<T: Real>(
        &self,
        solver: &FlowSolver<T>,
        prev: &FieldState<T>,
        next: &FieldState<T>,
        waveform: &InletWaveform,
    ) -> LedgerRecord {
        let c = solver.config();
        let (rho, tau) = (c.rho, c.tau);
        let u = to_f64(&next.u);
        let w = to_f64(&prev.u);
        let du: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a - b).collect();
        let q = |m: &CsrMatrix<T>, x: &[f64]| m.cast::<f64>().quadratic_form(x);
        let st = solver.step_terms(&prev.u);
        let inlet = solver.inlet();
        let f = waveform.value(next.t.to_f64_lossy());
        let inlet_work = f * inlet.gamma.to_f64_lossy() * u.iter().zip(&inlet.load).map(|(a, b)| a * b.to_f64_lossy()).sum::<f64>();

        // The fractional estimate spends the increment terms on the pressure increment
        // and keeps half of the projection dissipation.
        let fractional = self.pressure_laplacian.is_some();
        let inc_w = if fractional { 0.0 } else { 1.0 };
        let mut terms = vec![
            term("viscous", q(solver.viscous(), &u), true, 1.0),
            term("increment", 0.5 * rho / tau * q(solver.mass(), &du), true, inc_w),
            term("duct_increment", 0.5 / tau * q(solver.duct_inertia(), &du), true, inc_w),
            term("duct_viscous", q(solver.duct_viscous(), &u), true, 1.0),
            term("convection", rho * q(&st.convection, &u), false, 1.0),
            term("backflow", q(&st.backflow, &u), true, 1.0),
            term("tangential", q(solver.tangential(), &u), true, 1.0),
            term("streamline", q(&st.streamline, &u), true, 1.0),
            term("inlet", q(&inlet.matrix, &u) - inlet_work, false, 1.0),
        ];
        match &self.pressure_laplacian {
            None => {
                let p = to_f64(&next.p);
                terms.push(term("pressure_stab", q(solver.pressure_stabilization(), &p), true, 1.0));
            }
            Some(k) => {
                // −p^kᵀ B u^{k+1} = −p^kᵀ B (u^{k+1} − u^k) + (τ/ρ) p^kᵀ P p^k, since p^k is the
                // projection of u^k
                let p0 = to_f64(&prev.p);
                let s = tau / rho;
                let grad = s * k.quadratic_form(&p0);
                let full = s * solver.projection_matrix().cast::<f64>().quadratic_form(&p0);
                let b = solver.divergence().cast::<f64>();
                let work: f64 = -p0.iter().zip(b.mul_vec(&du)).map(|(a, b)| a * b).sum::<f64>();
                terms.push(term("pressure_gradient", grad, true, 0.5));
                terms.push(term("outlet_pressure", full - grad, true, 0.5));
                terms.push(term("pressure_increment", work, false, 0.0));
            }
        }

        let (v0, b0) = solver.energy(&prev.u);
        let (v1, b1) = solver.energy(&next.u);
        let e0 = (v0 + b0).to_f64_lossy();
        let e1 = (v1 + b1).to_f64_lossy();
        let rate = (e1 - e0) / tau;
        let total: f64 = terms.iter().map(|t| t.value).sum();
        let weighted: f64 = terms.iter().map(|t| t.weight * t.value).sum();
        LedgerRecord {
            t: next.t.to_f64_lossy(),
            energy: e1,
            rate,
            residual: (rate + total).abs(),
            signed_sum: rate + weighted,
            terms,
        }
    }

    pub fn write_csv_to<W: Write>(&self, mut w: W) -> Result<()> {
        let Some(first) = self.records.first() else {
            writeln!(w, "t,E,rate,residual,signed_sum")?;
            return Ok(());
        };
        write!(w, "t,E,rate")?;
        for t in &first.terms {
            write!(w, ",{}", t.name)?;
        }
        writeln!(w, ",residual,signed_sum")?;
        for r in &self.records {
            write!(w, "{:e},{:e},{:e}", r.t, r.energy, r.rate)?;
            for t in &r.terms {
                write!(w, ",{:e}", t.value)?;
            }
            writeln!(w, ",{:e},{:e}", r.residual, r.signed_sum)?;
        }
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// Balance of a single step, see [`EnergyLedger`].
pub fn energy_ledger<T: Real>(
    solver: &FlowSolver<T>,
    prev: &FieldState<T>,
    next: &FieldState<T>,
    waveform: &InletWaveform,
) -> LedgerRecord {
    EnergyLedger::new(solver).evaluate(solver, prev, next, waveform)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::dubc::{OutletKind, OutletSpec};
    use crate::mesh::{generate_bifurcation, generate_channel, outlet_tag};
    use crate::timestepping::{BoundaryRoles, SolverConfig};

    #[test]
    fn relative_l2_examples() {
        let r = [1.0, -2.0, 0.5, 3.0];
        assert_eq!(relative_l2(&r, &r).unwrap(), 0.0);
        let twice: Vec<f64> = r.iter().map(|x| 2.0 * x).collect();
        assert!((relative_l2(&twice, &r).unwrap() - 1.0).abs() < 1e-15);
        assert!((relative_l2(&[0.0; 4], &r).unwrap() - 1.0).abs() < 1e-15);
        assert!(relative_l2(&r, &[0.0; 4]).is_err());
        assert!(relative_l2(&r, &r[..3]).is_err());
    }

    #[test]
    fn error_series_csv() {
        let mut s = ErrorSeries::new();
        s.push(0.03, 0.25);
        let mut buf = Vec::new();
        s.write_csv_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("t,eps_sq"));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn interpolation_on_identical_meshes_is_identity() {
        let m = generate_channel::<f64>(2.0, 1.0, 6, 3).unwrap();
        let vals: Vec<f64> = (0..2 * m.num_vertices()).map(|i| (i as f64 * 0.37).sin()).collect();
        let out = interpolate_between_meshes(&vals, 2, &m, &m).unwrap();
        for (a, b) in out.iter().zip(&vals) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_reproduces_linear_fields() {
        let coarse = generate_channel::<f64>(2.0, 1.0, 4, 2).unwrap();
        let fine = generate_channel::<f64>(2.0, 1.0, 12, 6).unwrap();
        let vals: Vec<f64> = coarse.vertices().iter().map(|v| 3.0 * v[0] - v[1] + 0.5).collect();
        let out = interpolate_between_meshes(&vals, 1, &coarse, &fine).unwrap();
        for (v, x) in fine.vertices().iter().zip(&out) {
            assert!((x - (3.0 * v[0] - v[1] + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_outside_source_fails() {
        let small = generate_channel::<f64>(1.0, 1.0, 2, 2).unwrap();
        let big = generate_channel::<f64>(2.0, 1.0, 4, 2).unwrap();
        let vals = vec![0.0; small.num_vertices()];
        assert!(matches!(
            interpolate_between_meshes(&vals, 1, &small, &big),
            Err(Error::PointLocation { .. })
        ));
    }

    fn bifurcation_solver(scheme: Scheme) -> FlowSolver<f64> {
        let mesh = Arc::new(generate_bifurcation::<f64>(2.0, 2.0, 1.0, 2).unwrap());
        let outlets = [(1, 1.0), (2, 3.0)]
            .iter()
            .map(|&(k, l)| OutletSpec::new(&mesh, outlet_tag(k), OutletKind::Duct { length_cm: l }, 1e-8).unwrap())
            .collect();
        let config = SolverConfig { tau: 5e-3, t_end: 0.05, scheme, ..Default::default() };
        FlowSolver::new(mesh, BoundaryRoles::default(), outlets, config).unwrap()
    }

    #[test]
    fn zero_states_have_zero_terms() {
        let s = bifurcation_solver(Scheme::Monolithic);
        let z = FieldState::zeros(s.dofs());
        let r = energy_ledger(&s, &z, &z, &InletWaveform::Constant { value: 0.0 });
        assert!(r.terms.iter().all(|t| t.value == 0.0));
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn monolithic_balance_is_an_identity() {
        let mut s = bifurcation_solver(Scheme::Monolithic);
        let wf = InletWaveform::Constant { value: 0.0 };
        let u0: Vec<f64> = s.outlet_exchange_field(outlet_tag(1)).unwrap().iter().map(|x| 5.0 * x).collect();
        let state = s.prepare_state(u0).unwrap();
        let mut ledger = EnergyLedger::new(&s);
        s.advance(state, 10, &wf, |sv, prev, next| {
            let r = ledger.record(sv, prev, next, &wf);
            let e_prev = r.energy - r.rate * sv.config().tau;
            assert!(r.residual < 1e-8 * (e_prev / sv.config().tau + r.scale()), "{r:?}");
            for t in r.terms.iter().filter(|t| t.dissipative) {
                assert!(t.value >= -1e-12, "{} = {}", t.name, t.value);
            }
            Ok(())
        })
        .unwrap();
        assert_eq!(ledger.records.len(), 10);
    }

    #[test]
    fn forced_monolithic_balance_is_an_identity() {
        let mut s = bifurcation_solver(Scheme::Monolithic);
        let wf = InletWaveform::Constant { value: 1.0 };
        let state = s.initial_state().unwrap();
        let ledger = EnergyLedger::new(&s);
        s.advance(state, 5, &wf, |sv, prev, next| {
            let r = ledger.evaluate(sv, prev, next, &wf);
            assert!(r.residual < 1e-8 * r.scale(), "{r:?}");
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn fractional_balance_closes_and_satisfies_the_estimate() {
        let mut s = bifurcation_solver(Scheme::Fractional);
        let wf = InletWaveform::Constant { value: 0.0 };
        let u0: Vec<f64> = s.outlet_exchange_field(outlet_tag(1)).unwrap().iter().map(|x| 5.0 * x).collect();
        let state = s.prepare_state(u0).unwrap();
        let ledger = EnergyLedger::new(&s);
        s.advance(state, 10, &wf, |sv, prev, next| {
            let r = ledger.evaluate(sv, prev, next, &wf);
            assert!(r.residual < 1e-8 * r.scale(), "{r:?}");
            assert!(r.signed_sum <= 1e-10 * r.scale(), "{r:?}");
            for t in r.terms.iter().filter(|t| t.dissipative) {
                assert!(t.value >= -1e-12, "{} = {}", t.name, t.value);
            }
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn ledger_csv_has_named_columns() {
        let mut s = bifurcation_solver(Scheme::Monolithic);
        let wf = InletWaveform::Constant { value: 1.0 };
        let state = s.initial_state().unwrap();
        let mut ledger = EnergyLedger::new(&s);
        s.advance(state, 2, &wf, |sv, prev, next| {
            ledger.record(sv, prev, next, &wf);
            Ok(())
        })
        .unwrap();
        let mut buf = Vec::new();
        ledger.write_csv_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("t,E,rate,viscous,"));
        assert!(header.ends_with("pressure_stab,residual,signed_sum"));
        assert_eq!(text.lines().count(), 3);
    }
}
