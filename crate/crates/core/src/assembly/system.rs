//! Block saddle-point systems and the steady Stokes inlet profile.

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, LinearSolver};
use crate::mesh::Mesh;
use crate::scalar::Real;

use super::forms::{facet_tensor_mass, tangential_projector};
use super::{assemble_divergence, assemble_pressure_stab, assemble_stiffness, DofMap, Field, FieldState};

/// Velocity dofs (all components) of vertices on facets with any of `wall_tags`.
pub fn wall_dofs<T: Real>(mesh: &Mesh<T>, dofs: &DofMap, wall_tags: &[i32]) -> Vec<usize> {
    let mut verts: Vec<usize> = wall_tags.iter().flat_map(|&t| mesh.vertices_with_tag(t)).collect();
    verts.sort_unstable();
    verts.dedup();
    verts.iter().flat_map(|&v| (0..dofs.dim()).map(move |c| dofs.vel(v, c))).collect()
}

/// The monolithic matrix `[[A, −Bᵀ], [B, S]]` on a fixed pattern.
#[derive(Clone, Debug)]
pub struct SaddleSystem<T> {
    n_u: usize,
    matrix: CsrMatrix<T>,
}

impl<T: Real> SaddleSystem<T> {
    pub fn new(velocity: &CsrMatrix<T>, coupling: &CsrMatrix<T>, pressure: &CsrMatrix<T>) -> Self {
        let n_u = velocity.nrows();
        let n = n_u + pressure.nrows();
        let coupling_t = coupling.transpose();
        let matrix = CsrMatrix::pattern_union(
            n,
            n,
            &[(velocity, 0, 0), (&coupling_t, 0, n_u), (coupling, n_u, 0), (pressure, n_u, n_u)],
        );
        Self { n_u, matrix }
    }

    /// Fills the blocks; `coupling_t` must be the transpose of `coupling`. Rows and columns of
    /// `dirichlet` velocity dofs are replaced by identity.
    pub fn assemble(
        &mut self,
        velocity: &CsrMatrix<T>,
        coupling: &CsrMatrix<T>,
        coupling_t: &CsrMatrix<T>,
        pressure: &CsrMatrix<T>,
        dirichlet: &[usize],
    ) -> &CsrMatrix<T> {
        let n_u = self.n_u;
        self.matrix.fill_zero();
        self.matrix.add_block(T::one(), velocity, 0, 0);
        self.matrix.add_block(-T::one(), coupling_t, 0, n_u);
        self.matrix.add_block(T::one(), coupling, n_u, 0);
        self.matrix.add_block(T::one(), pressure, n_u, n_u);
        self.matrix.eliminate_dofs(dirichlet);
        &self.matrix
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }
}

/// Steady Stokes solution driven by a unit pressure drop across the inlet, with no-slip on
/// `wall_tags`, tangential velocity penalized on the inlet, and traction-free elsewhere.
/// The result is scaled so the inward flux through the inlet equals 1.
#[allow(clippy::too_many_arguments)]
pub fn stokes_inlet_profile<T: Real>(
    mesh: &Mesh<T>,
    dofs: &DofMap,
    inlet_tag: i32,
    wall_tags: &[i32],
    mu: T,
    gamma_p: T,
    gamma_tan: T,
    solver: &mut LinearSolver,
) -> Result<FieldState<T>> {
    let inlet = mesh.facets_with_tag(inlet_tag);
    if inlet.is_empty() {
        return Err(Error::UnknownTag(inlet_tag));
    }
    let d = dofs.dim();
    let mut a = assemble_stiffness(mesh, dofs, Field::Vector, mu);
    facet_tensor_mass(mesh, dofs, &inlet, None, |n| tangential_projector(n, gamma_tan), &mut a);
    let b = assemble_divergence(mesh, dofs);
    let s = assemble_pressure_stab(mesh, dofs, gamma_p, mu);
    let mut rhs = vec![T::zero(); dofs.n_u() + dofs.n_p()];
    for &f in &inlet {
        let geo = mesh.facet_geometry(f)?;
        let share = geo.measure / T::from_usize_lossy(d);
        for &v in mesh.facet(f) {
            for c in 0..d {
                rhs[dofs.vel(v, c)] -= geo.normal[c] * share;
            }
        }
    }
    let walls = wall_dofs(mesh, dofs, wall_tags);
    for &w in &walls {
        rhs[w] = T::zero();
    }
    let mut sys = SaddleSystem::new(&a, &b, &s);
    let bt = b.transpose();
    let m = sys.assemble(&a, &b, &bt, &s, &walls);
    let x = solver.solve(m, &rhs)?;
    let mut u = x[..dofs.n_u()].to_vec();
    let mut p = x[dofs.n_u()..].to_vec();
    let mut flux = T::zero();
    for &f in &inlet {
        let geo = mesh.facet_geometry(f)?;
        let share = geo.measure / T::from_usize_lossy(d);
        for &v in mesh.facet(f) {
            for c in 0..d {
                flux -= u[dofs.vel(v, c)] * geo.normal[c] * share;
            }
        }
    }
    if !(flux > T::zero()) || !flux.is_finite() {
        return Err(Error::LinearSolve {
            reason: "Stokes inlet problem produced no inflow".into(),
            residual: flux.to_f64_lossy(),
        });
    }
    for x in u.iter_mut() {
        *x /= flux;
    }
    for x in p.iter_mut() {
        *x /= flux;
    }
    Ok(FieldState { u, p, t: T::zero() })
}
