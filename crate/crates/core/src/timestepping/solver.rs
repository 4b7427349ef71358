//! The flow solver: cached operators and the two time-marching schemes.

use std::sync::Arc;

use crate::assembly::{
    assemble_convection_into, assemble_divergence, assemble_gradient, assemble_inlet_penalty, assemble_mass,
    assemble_pressure_stab, assemble_stiffness, assemble_streamline_diffusion_into, cell_divergence_norm,
    stokes_inlet_profile, wall_dofs, DofMap, Field, FieldState, InletPenalty, SaddleSystem,
};
use crate::dubc::{
    assemble_backflow_into, assemble_duct_inertia, assemble_duct_viscous, assemble_outlet_pressure_stiffness,
    assemble_pressure_penalty, assemble_tangential_penalty, outlet_flow_rate, outlet_mean_pressure,
    validate_outlets, OutletKind, OutletSpec,
};
use crate::error::{Error, Result};
use crate::linalg::{check_residual, CsrMatrix, Factorization, LinearSolver};
use crate::mesh::Mesh;
use crate::scalar::Real;

use super::config::{BoundaryRoles, InletWaveform, Scheme, SolverConfig};
use super::log::{LogRecord, TimeSeriesLog};

/// Operators that depend on the advecting velocity of the current step.
#[derive(Clone, Debug)]
pub struct StepTerms<T> {
    pub convection: CsrMatrix<T>,
    pub streamline: CsrMatrix<T>,
    pub backflow: CsrMatrix<T>,
}

/// Field snapshot kept during a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot<T> {
    pub state: FieldState<T>,
    /// End-of-step corrected velocity (fractional scheme only).
    pub corrected: Option<Vec<T>>,
}

/// Snapshots and per-step diagnostics of a run.
#[derive(Clone, Debug)]
pub struct RunOutput<T> {
    pub snapshots: Vec<Snapshot<T>>,
    pub log: TimeSeriesLog,
    pub final_state: FieldState<T>,
}

/// Incompressible Navier–Stokes solver with duct outlets on a fixed mesh.
///
/// Cloning yields an independent solver sharing only the immutable mesh, so clones can
/// be driven from different threads.
#[derive(Clone)]
pub struct FlowSolver<T: Real> {
    mesh: Arc<Mesh<T>>,
    dofs: DofMap,
    config: SolverConfig,
    roles: BoundaryRoles,
    outlets: Vec<OutletSpec<T>>,
    walls: Vec<usize>,
    mass: CsrMatrix<T>,
    viscous: CsrMatrix<T>,
    div: CsrMatrix<T>,
    div_t: CsrMatrix<T>,
    grad: CsrMatrix<T>,
    pressure_stab: CsrMatrix<T>,
    inlet: InletPenalty<T>,
    tangential: CsrMatrix<T>,
    unit_inertia: Vec<Option<CsrMatrix<T>>>,
    unit_viscous: Vec<Option<CsrMatrix<T>>>,
    unit_pressure: Vec<CsrMatrix<T>>,
    projection_base: CsrMatrix<T>,
    inertia: CsrMatrix<T>,
    duct_viscous: CsrMatrix<T>,
    projection: CsrMatrix<T>,
    projection_factor: Option<Factorization<T>>,
    mass_factor: Option<Factorization<T>>,
    convection: CsrMatrix<T>,
    streamline: CsrMatrix<T>,
    backflow: CsrMatrix<T>,
    velocity: CsrMatrix<T>,
    saddle: SaddleSystem<T>,
    solver: LinearSolver,
    aux_solver: LinearSolver,
    profile: Vec<T>,
}

fn combine<T: Real>(out: &mut CsrMatrix<T>, terms: &[(T, &CsrMatrix<T>)]) {
    out.fill_zero();
    for (c, m) in terms {
        out.axpy_same_pattern(*c, m);
    }
}

impl<T: Real> FlowSolver<T> {
    /// Assembles all time-invariant operators and the Stokes inflow profile.
    pub fn new(
        mesh: Arc<Mesh<T>>,
        roles: BoundaryRoles,
        outlets: Vec<OutletSpec<T>>,
        config: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        validate_outlets(&outlets)?;
        check_roles(&mesh, &roles, &outlets)?;
        let m = &*mesh;
        let dofs = DofMap::new(m);
        let rho = T::lit(config.rho);
        let mu = T::lit(config.mu);
        let walls = wall_dofs(m, &dofs, &roles.wall_tags);
        let mut aux_solver = LinearSolver::new(config.linear_solver);
        let profile = stokes_inlet_profile(
            m,
            &dofs,
            roles.inlet_tag,
            &roles.wall_tags,
            mu,
            T::lit(config.gamma_p),
            T::lit(config.gamma_tan),
            &mut aux_solver,
        )?
        .u;
        let mass = assemble_mass(m, &dofs, Field::Vector);
        let viscous = assemble_stiffness(m, &dofs, Field::Vector, mu);
        let div = assemble_divergence(m, &dofs);
        let div_t = div.transpose();
        let grad = assemble_gradient(m, &dofs);
        let pressure_stab = assemble_pressure_stab(m, &dofs, T::lit(config.gamma_p), mu);
        let inlet = assemble_inlet_penalty(m, &dofs, roles.inlet_tag, T::lit(config.gamma_inlet), &profile)?;
        let tangential = assemble_tangential_penalty(m, &dofs, &outlets, T::lit(config.gamma_tan));
        let mut unit_inertia = Vec::new();
        let mut unit_viscous = Vec::new();
        let mut unit_pressure = Vec::new();
        for o in &outlets {
            let unit = [o.with_length(1.0)];
            match o.kind {
                OutletKind::Duct { .. } => {
                    unit_inertia.push(Some(assemble_duct_inertia(m, &dofs, &unit, rho)));
                    unit_viscous.push(Some(assemble_duct_viscous(m, &dofs, &unit, mu)));
                }
                OutletKind::Free => {
                    unit_inertia.push(None);
                    unit_viscous.push(None);
                }
            }
            unit_pressure.push(assemble_pressure_penalty(m, &dofs, &unit));
        }
        let mut projection_base = assemble_stiffness(m, &dofs, Field::Scalar, T::one());
        if config.gamma_press > 0.0 {
            let s = assemble_outlet_pressure_stiffness(m, &dofs, &outlets, T::lit(config.gamma_press));
            projection_base.axpy_same_pattern(T::one(), &s);
        }
        let vpat = dofs.pattern(m, Field::Vector);
        let saddle = SaddleSystem::new(&vpat, &div, &pressure_stab);
        let mut solver = Self {
            dofs,
            config: config.clone(),
            roles,
            walls,
            mass,
            viscous,
            div,
            div_t,
            grad,
            pressure_stab,
            inlet,
            tangential,
            unit_inertia,
            unit_viscous,
            unit_pressure,
            projection: projection_base.clone(),
            projection_base,
            inertia: vpat.clone(),
            duct_viscous: vpat.clone(),
            projection_factor: None,
            mass_factor: None,
            convection: vpat.clone(),
            streamline: vpat.clone(),
            backflow: vpat.clone(),
            velocity: vpat,
            saddle,
            solver: LinearSolver::new(config.linear_solver),
            aux_solver,
            profile,
            outlets,
            mesh,
        };
        solver.rebuild_length_operators();
        Ok(solver)
    }

    fn rebuild_length_operators(&mut self) {
        self.inertia.fill_zero();
        self.duct_viscous.fill_zero();
        self.projection = self.projection_base.clone();
        for (k, o) in self.outlets.iter().enumerate() {
            match o.length() {
                Some(l) => {
                    if let Some(m) = &self.unit_inertia[k] {
                        self.inertia.axpy_same_pattern(l, m);
                    }
                    if let Some(m) = &self.unit_viscous[k] {
                        self.duct_viscous.axpy_same_pattern(l, m);
                    }
                    self.projection.axpy_same_pattern(T::one(), &self.unit_pressure[k].scaled(T::one() / l));
                }
                // the unit penalty of a free outlet already carries its grounding coefficient
                None => self.projection.axpy_same_pattern(T::one(), &self.unit_pressure[k]),
            }
        }
        self.projection_factor = None;
    }

    /// Replaces the duct lengths (cm), in the order duct outlets appear in the outlet list.
    pub fn set_lengths(&mut self, lengths: &[f64]) -> Result<()> {
        let n = self.outlets.iter().filter(|o| o.is_duct()).count();
        if lengths.len() != n {
            return Err(Error::InvalidInput(format!("expected {n} duct lengths, got {}", lengths.len())));
        }
        if let Some(bad) = lengths.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidInput(format!("duct length must be positive, got {bad}")));
        }
        let mut it = lengths.iter();
        for o in self.outlets.iter_mut().filter(|o| o.is_duct()) {
            o.kind = OutletKind::Duct { length_cm: *it.next().unwrap() };
        }
        self.rebuild_length_operators();
        Ok(())
    }

    /// Current duct lengths in outlet order.
    pub fn lengths(&self) -> Vec<f64> {
        self.outlets.iter().filter_map(|o| o.length().map(|l| l.to_f64_lossy())).collect()
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> Arc<Mesh<T>> {
        Arc::clone(&self.mesh)
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn roles(&self) -> &BoundaryRoles {
        &self.roles
    }

    pub fn outlets(&self) -> &[OutletSpec<T>] {
        &self.outlets
    }

    pub fn wall_dofs(&self) -> &[usize] {
        &self.walls
    }

    /// Velocity mass matrix.
    pub fn mass(&self) -> &CsrMatrix<T> {
        &self.mass
    }

    /// `μ K` on velocity.
    pub fn viscous(&self) -> &CsrMatrix<T> {
        &self.viscous
    }

    pub fn divergence(&self) -> &CsrMatrix<T> {
        &self.div
    }

    pub fn gradient(&self) -> &CsrMatrix<T> {
        &self.grad
    }

    pub fn pressure_stabilization(&self) -> &CsrMatrix<T> {
        &self.pressure_stab
    }

    pub fn inlet(&self) -> &InletPenalty<T> {
        &self.inlet
    }

    pub fn tangential(&self) -> &CsrMatrix<T> {
        &self.tangential
    }

    /// `Σ ℓ_m ρ ∫ u_n v_n`.
    pub fn duct_inertia(&self) -> &CsrMatrix<T> {
        &self.inertia
    }

    pub fn duct_viscous(&self) -> &CsrMatrix<T> {
        &self.duct_viscous
    }

    /// Matrix of the pressure projection step.
    pub fn projection_matrix(&self) -> &CsrMatrix<T> {
        &self.projection
    }

    /// Normalized Stokes inflow field.
    pub fn inlet_profile(&self) -> &[T] {
        &self.profile
    }

    /// Convection, streamline diffusion and backflow for advecting field `w`.
    pub fn step_terms(&self, w: &[T]) -> StepTerms<T> {
        let mut t = StepTerms {
            convection: self.convection.clone(),
            streamline: self.streamline.clone(),
            backflow: self.backflow.clone(),
        };
        self.fill_step_terms(w, &mut t.convection, &mut t.streamline, &mut t.backflow);
        t
    }

    fn fill_step_terms(&self, w: &[T], conv: &mut CsrMatrix<T>, sd: &mut CsrMatrix<T>, bf: &mut CsrMatrix<T>) {
        let c = &self.config;
        let m = &*self.mesh;
        assemble_convection_into(m, &self.dofs, w, conv);
        if c.gamma_sd > 0.0 {
            let (g, tau, rho) = (T::lit(c.gamma_sd), T::lit(c.tau), T::lit(c.rho));
            assemble_streamline_diffusion_into(m, &self.dofs, w, g, tau, rho, sd);
        } else {
            sd.fill_zero();
        }
        if c.backflow {
            assemble_backflow_into(m, &self.dofs, &self.outlets, w, T::lit(c.rho), bf);
        } else {
            bf.fill_zero();
        }
    }

    fn assemble_velocity_block(&mut self, w: &[T]) {
        let empty = || CsrMatrix::zeros(0, 0);
        let mut conv = std::mem::replace(&mut self.convection, empty());
        let mut sd = std::mem::replace(&mut self.streamline, empty());
        let mut bf = std::mem::replace(&mut self.backflow, empty());
        self.fill_step_terms(w, &mut conv, &mut sd, &mut bf);
        let rho = T::lit(self.config.rho);
        let inv_tau = T::one() / T::lit(self.config.tau);
        let one = T::one();
        combine(
            &mut self.velocity,
            &[
                (rho * inv_tau, &self.mass),
                (rho, &conv),
                (one, &self.viscous),
                (one, &sd),
                (inv_tau, &self.inertia),
                (one, &self.duct_viscous),
                (one, &bf),
                (one, &self.tangential),
                (one, &self.inlet.matrix),
            ],
        );
        self.convection = conv;
        self.streamline = sd;
        self.backflow = bf;
    }

    /// Momentum right-hand side `(ρ/τ) M u + (1/τ) D u + inlet data at `t_next``.
    fn momentum_rhs(&self, u: &[T], t_next: f64, waveform: &InletWaveform) -> Vec<T> {
        let rho = T::lit(self.config.rho);
        let inv_tau = T::one() / T::lit(self.config.tau);
        let mu = self.mass.mul_vec(u);
        let du = self.inertia.mul_vec(u);
        let mut rhs = self.inlet.rhs(T::lit(waveform.value(t_next)));
        for i in 0..rhs.len() {
            rhs[i] += rho * inv_tau * mu[i] + inv_tau * du[i];
        }
        rhs
    }

    /// Assembled monolithic system and right-hand side for the step from `state`.
    pub fn monolithic_system(&mut self, state: &FieldState<T>, waveform: &InletWaveform) -> (CsrMatrix<T>, Vec<T>) {
        let t_next = self.next_time(state).to_f64_lossy();
        self.assemble_velocity_block(&state.u);
        let mut rhs = self.momentum_rhs(&state.u, t_next, waveform);
        for &w in &self.walls {
            rhs[w] = T::zero();
        }
        rhs.resize(self.dofs.n_u() + self.dofs.n_p(), T::zero());
        let a = self.saddle.assemble(&self.velocity, &self.div, &self.div_t, &self.pressure_stab, &self.walls);
        (a.clone(), rhs)
    }

    /// Tentative-velocity system of the fractional scheme for the step from `state`.
    pub fn fractional_system(&mut self, state: &FieldState<T>, waveform: &InletWaveform) -> (CsrMatrix<T>, Vec<T>) {
        let t_next = self.next_time(state).to_f64_lossy();
        self.assemble_velocity_block(&state.u);
        let mut rhs = self.momentum_rhs(&state.u, t_next, waveform);
        let btp = self.div_t.mul_vec(&state.p);
        for (r, b) in rhs.iter_mut().zip(&btp) {
            *r += *b;
        }
        for &w in &self.walls {
            rhs[w] = T::zero();
        }
        let mut a = self.velocity.clone();
        a.eliminate_dofs(&self.walls);
        (a, rhs)
    }

    /// Pressure from the projection step: `(K + Σ (1/ℓ) M_Γ) p = −(ρ/τ) B u`.
    pub fn project_pressure(&mut self, u: &[T]) -> Result<Vec<T>> {
        if self.projection_factor.is_none() {
            self.projection_factor = Some(self.aux_solver.factor(&self.projection)?);
        }
        let s = -T::lit(self.config.rho) / T::lit(self.config.tau);
        let rhs: Vec<T> = self.div.mul_vec(u).into_iter().map(|x| s * x).collect();
        let p = self.projection_factor.as_ref().unwrap().solve(&rhs)?;
        check_residual(&self.projection, &p, &rhs)?;
        Ok(p)
    }

    /// State at `t = 0` with velocity `u0`; the fractional scheme gets its pressure from
    /// one projection of `u0`.
    pub fn prepare_state(&mut self, u0: Vec<T>) -> Result<FieldState<T>> {
        let mut s = FieldState { u: u0, p: vec![T::zero(); self.dofs.n_p()], t: T::zero() };
        s.validate(&self.dofs)?;
        if self.config.scheme == Scheme::Fractional {
            s.p = self.project_pressure(&s.u)?;
        }
        Ok(s)
    }

    /// Steady Stokes field entering through outlet `tag` and leaving through the other
    /// outlets, with unit flux and zero velocity on the inlet and walls. Useful as initial
    /// data for unforced runs.
    pub fn outlet_exchange_field(&mut self, tag: i32) -> Result<Vec<T>> {
        if !self.outlets.iter().any(|o| o.tag == tag) {
            return Err(Error::UnknownTag(tag));
        }
        let mut closed = self.roles.wall_tags.clone();
        closed.push(self.roles.inlet_tag);
        let c = &self.config;
        Ok(stokes_inlet_profile(
            &self.mesh,
            &self.dofs,
            tag,
            &closed,
            T::lit(c.mu),
            T::lit(c.gamma_p),
            T::lit(c.gamma_tan),
            &mut self.aux_solver,
        )?
        .u)
    }

    pub fn initial_state(&mut self) -> Result<FieldState<T>> {
        self.prepare_state(vec![T::zero(); self.dofs.n_u()])
    }

    /// Backward-Euler step of the coupled system.
    pub fn step_monolithic(&mut self, state: &FieldState<T>, waveform: &InletWaveform) -> Result<FieldState<T>> {
        let (a, rhs) = self.monolithic_system(state, waveform);
        let x = self.solver.solve(&a, &rhs)?;
        let n_u = self.dofs.n_u();
        Ok(FieldState { u: x[..n_u].to_vec(), p: x[n_u..].to_vec(), t: self.next_time(state) })
    }

    /// Tentative velocity step with the explicit pressure of `state`, followed by the
    /// projection that yields the pressure of the new state.
    pub fn step_fractional(&mut self, state: &FieldState<T>, waveform: &InletWaveform) -> Result<FieldState<T>> {
        let (a, rhs) = self.fractional_system(state, waveform);
        let u = self.solver.solve(&a, &rhs)?;
        let p = self.project_pressure(&u)?;
        Ok(FieldState { u, p, t: self.next_time(state) })
    }

    pub fn step(&mut self, state: &FieldState<T>, waveform: &InletWaveform) -> Result<FieldState<T>> {
        match self.config.scheme {
            Scheme::Monolithic => self.step_monolithic(state, waveform),
            Scheme::Fractional => self.step_fractional(state, waveform),
        }
    }

    /// Time level after `state`, computed from the step index so it does not drift.
    fn next_time(&self, state: &FieldState<T>) -> T {
        let tau = self.config.tau;
        T::lit(((state.t.to_f64_lossy() / tau).round() + 1.0) * tau)
    }

    /// End-of-step corrected velocity of `state`, see [`corrected_velocity`].
    pub fn corrected_velocity(&mut self, state: &FieldState<T>) -> Result<Vec<T>> {
        if self.mass_factor.is_none() {
            self.mass_factor = Some(self.aux_solver.factor(&constrained_mass(&self.mass, &self.walls))?);
        }
        let rhs = corrected_rhs(&self.mass, &self.grad, &self.walls, state, &self.config);
        self.mass_factor.as_ref().unwrap().solve(&rhs)
    }

    /// Kinetic energy in the volume and in the virtual ducts.
    pub fn energy(&self, u: &[T]) -> (T, T) {
        let half = T::lit(0.5);
        (half * T::lit(self.config.rho) * self.mass.quadratic_form(u), half * self.inertia.quadratic_form(u))
    }

    pub fn record(&self, state: &FieldState<T>) -> LogRecord {
        let (ev, eb) = self.energy(&state.u);
        LogRecord {
            t: state.t.to_f64_lossy(),
            e_vol: ev.to_f64_lossy(),
            e_bnd: eb.to_f64_lossy(),
            divnorm: cell_divergence_norm(&self.mesh, &self.dofs, &state.u).to_f64_lossy(),
            umax: state.max_speed(&self.dofs).to_f64_lossy(),
            flow: self.outlets.iter().map(|o| outlet_flow_rate(&state.u, &self.mesh, &self.dofs, o).to_f64_lossy()).collect(),
            pressure: self.outlets.iter().map(|o| outlet_mean_pressure(&state.p, &self.mesh, o).to_f64_lossy()).collect(),
        }
    }

    /// Advances `steps` time steps from `state`, calling `observe(prev, next)` after each.
    pub fn advance<F>(
        &mut self,
        state: FieldState<T>,
        steps: usize,
        waveform: &InletWaveform,
        mut observe: F,
    ) -> Result<FieldState<T>>
    where
        F: FnMut(&mut Self, &FieldState<T>, &FieldState<T>) -> Result<()>,
    {
        let mut cur = state;
        let tau = self.config.tau;
        for _ in 0..steps {
            let step_index = (cur.t.to_f64_lossy() / tau).round() as usize + 1;
            let next = self.step(&cur, waveform).map_err(|e| Error::StepFailed {
                step: step_index,
                time: cur.t.to_f64_lossy() + tau,
                source: Box::new(e),
            })?;
            if next.u.iter().chain(&next.p).any(|x| !x.is_finite()) {
                return Err(Error::StepFailed {
                    step: step_index,
                    time: next.t.to_f64_lossy(),
                    source: Box::new(Error::LinearSolve { reason: "non-finite fields".into(), residual: f64::NAN }),
                });
            }
            observe(self, &cur, &next)?;
            cur = next;
        }
        Ok(cur)
    }

    /// Time loop from `initial` (or rest) to `t_end`, logging every step and keeping
    /// snapshots at the configured cadence.
    pub fn run(&mut self, waveform: &InletWaveform, initial: Option<FieldState<T>>) -> Result<RunOutput<T>> {
        let state = match initial {
            Some(s) => s,
            None => self.initial_state()?,
        };
        let every = self.config.snapshot_every;
        let steps = self.config.num_steps();
        let mut log = TimeSeriesLog::new(self.outlets.len());
        let mut snapshots = Vec::new();
        let mut count = 0usize;
        let final_state = self.advance(state, steps, waveform, |solver, _, next| {
            count += 1;
            log.push(solver.record(next));
            if every > 0 && count % every == 0 {
                let corrected = match solver.config.scheme {
                    Scheme::Fractional => Some(solver.corrected_velocity(next)?),
                    Scheme::Monolithic => None,
                };
                snapshots.push(Snapshot { state: next.clone(), corrected });
            }
            Ok(())
        })?;
        Ok(RunOutput { snapshots, log, final_state })
    }
}

/// L² projection `M u_c = M u − (τ/ρ) G p` onto the velocity space, with the dofs in
/// `fixed` (walls) held at zero.
pub fn corrected_velocity<T: Real>(
    mass: &CsrMatrix<T>,
    gradient: &CsrMatrix<T>,
    fixed: &[usize],
    state: &FieldState<T>,
    config: &SolverConfig,
    solver: &mut LinearSolver,
) -> Result<Vec<T>> {
    let rhs = corrected_rhs(mass, gradient, fixed, state, config);
    solver.solve(&constrained_mass(mass, fixed), &rhs)
}

fn constrained_mass<T: Real>(mass: &CsrMatrix<T>, fixed: &[usize]) -> CsrMatrix<T> {
    let mut m = mass.clone();
    m.eliminate_dofs(fixed);
    m
}

fn corrected_rhs<T: Real>(
    mass: &CsrMatrix<T>,
    gradient: &CsrMatrix<T>,
    fixed: &[usize],
    state: &FieldState<T>,
    config: &SolverConfig,
) -> Vec<T> {
    let s = T::lit(config.tau) / T::lit(config.rho);
    let mu = mass.mul_vec(&state.u);
    let gp = gradient.mul_vec(&state.p);
    let mut rhs: Vec<T> = mu.iter().zip(&gp).map(|(&a, &b)| a - s * b).collect();
    for &d in fixed {
        rhs[d] = T::zero();
    }
    rhs
}

/// Every boundary tag must have exactly one role (inlet, wall or outlet).
fn check_roles<T: Real>(mesh: &Mesh<T>, roles: &BoundaryRoles, outlets: &[OutletSpec<T>]) -> Result<()> {
    for tag in mesh.tags() {
        let mut n = 0;
        n += usize::from(roles.inlet_tag == tag);
        n += roles.wall_tags.iter().filter(|&&w| w == tag).count();
        n += outlets.iter().filter(|o| o.tag == tag).count();
        match n {
            0 => return Err(Error::Config(format!("boundary tag {tag} has no inlet, wall or outlet entry"))),
            1 => {}
            _ => return Err(Error::Config(format!("boundary tag {tag} is assigned more than one role"))),
        }
    }
    let known = mesh.tags();
    for t in std::iter::once(roles.inlet_tag).chain(roles.wall_tags.iter().copied()) {
        if !known.contains(&t) {
            return Err(Error::UnknownTag(t));
        }
    }
    Ok(())
}
