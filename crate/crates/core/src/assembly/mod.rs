//! P1/P1 finite-element spaces and elementwise assembly of the volume forms.

pub(crate) mod forms;
mod system;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::Mesh;
use crate::scalar::Real;

pub use forms::{
    assemble_convection, assemble_convection_into, assemble_divergence, assemble_gradient, assemble_inlet_penalty,
    assemble_mass, assemble_pressure_stab, assemble_stiffness, assemble_streamline_diffusion,
    assemble_streamline_diffusion_into, cell_divergence_norm, facet_mass, streamline_coefficient, InletPenalty,
};
pub use system::{stokes_inlet_profile, wall_dofs, SaddleSystem};

/// Sparse operator type produced by every assembly routine.
pub type SparseOperator<T> = CsrMatrix<T>;

/// Which P1 space an operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    /// One dof per vertex (pressure).
    Scalar,
    /// `dim` interleaved dofs per vertex (velocity).
    Vector,
}

/// Degrees of freedom of the P1/P1 velocity-pressure pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofMap {
    dim: usize,
    n_vertices: usize,
}

impl DofMap {
    pub fn new<T: Real>(mesh: &Mesh<T>) -> Self {
        Self { dim: mesh.dim(), n_vertices: mesh.num_vertices() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_u(&self) -> usize {
        self.dim * self.n_vertices
    }

    pub fn n_p(&self) -> usize {
        self.n_vertices
    }

    pub fn n(&self, field: Field) -> usize {
        match field {
            Field::Scalar => self.n_p(),
            Field::Vector => self.n_u(),
        }
    }

    pub fn ncomp(&self, field: Field) -> usize {
        match field {
            Field::Scalar => 1,
            Field::Vector => self.dim,
        }
    }

    /// Velocity dof of component `c` at vertex `v`.
    #[inline]
    pub fn vel(&self, v: usize, c: usize) -> usize {
        v * self.dim + c
    }

    /// Zero-valued operator whose pattern couples every pair of vertices sharing a cell
    /// (all component pairs for vector fields).
    pub fn pattern<T: Real>(&self, mesh: &Mesh<T>, field: Field) -> CsrMatrix<T> {
        let nc = self.ncomp(field);
        let adj = mesh.vertex_neighbors();
        let mut rows = Vec::with_capacity(self.n(field));
        for nbrs in &adj {
            let cols: Vec<usize> = nbrs.iter().flat_map(|&w| (0..nc).map(move |c| w * nc + c)).collect();
            for _ in 0..nc {
                rows.push(cols.clone());
            }
        }
        CsrMatrix::from_pattern(self.n(field), &rows)
    }

    /// Zero-valued `n_p × n_u` pattern of the divergence coupling.
    pub fn coupling_pattern<T: Real>(&self, mesh: &Mesh<T>) -> CsrMatrix<T> {
        let d = self.dim;
        let rows: Vec<Vec<usize>> = mesh
            .vertex_neighbors()
            .iter()
            .map(|nbrs| nbrs.iter().flat_map(|&w| (0..d).map(move |c| w * d + c)).collect())
            .collect();
        CsrMatrix::from_pattern(self.n_u(), &rows)
    }
}

/// Velocity and pressure coefficients at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState<T> {
    pub u: Vec<T>,
    pub p: Vec<T>,
    pub t: T,
}

impl<T: Real> FieldState<T> {
    pub fn zeros(dofs: &DofMap) -> Self {
        Self { u: vec![T::zero(); dofs.n_u()], p: vec![T::zero(); dofs.n_p()], t: T::zero() }
    }

    pub fn validate(&self, dofs: &DofMap) -> Result<()> {
        if self.u.len() != dofs.n_u() || self.p.len() != dofs.n_p() {
            return Err(Error::InvalidInput(format!(
                "field lengths ({}, {}) do not match dof counts ({}, {})",
                self.u.len(),
                self.p.len(),
                dofs.n_u(),
                dofs.n_p()
            )));
        }
        if self.u.iter().chain(&self.p).any(|x| !x.is_finite()) || !self.t.is_finite() {
            return Err(Error::InvalidInput("field state has non-finite entries".into()));
        }
        Ok(())
    }

    /// Velocity vector at vertex `v` (z = 0 in 2D).
    pub fn velocity_at(&self, dofs: &DofMap, v: usize) -> [T; 3] {
        let mut out = [T::zero(); 3];
        for c in 0..dofs.dim() {
            out[c] = self.u[dofs.vel(v, c)];
        }
        out
    }

    /// Largest nodal velocity magnitude.
    pub fn max_speed(&self, dofs: &DofMap) -> T {
        (0..dofs.n_p())
            .map(|v| {
                let w = self.velocity_at(dofs, v);
                (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt()
            })
            .fold(T::zero(), |a, b| a.max(b))
    }
}
