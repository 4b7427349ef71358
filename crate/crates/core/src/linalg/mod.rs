//! Sparse linear algebra: CSR storage, bandwidth-reducing ordering, banded direct LU,
//! and a preconditioned Krylov fallback.

pub mod band;
pub mod dense;
pub mod krylov;
pub mod ordering;
pub mod sparse;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use band::BandLu;
use krylov::{gmres, GmresOptions, Ilu0};
pub use sparse::{CsrMatrix, TripletBuilder};

/// Which linear solver backs the time steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinearSolverKind {
    Direct,
    Iterative { rel_tol: f64, restart: usize, max_iter: usize },
}

impl Default for LinearSolverKind {
    fn default() -> Self {
        LinearSolverKind::Direct
    }
}

/// A factorized operator ready for repeated solves.
#[derive(Clone, Debug)]
pub enum Factorization<T> {
    Direct(BandLu<T>),
    Iterative { matrix: CsrMatrix<T>, precond: Ilu0<T>, opts: GmresOptions },
}

impl<T: Real> Factorization<T> {
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        match self {
            Factorization::Direct(lu) => {
                let x = lu.solve(b);
                if x.iter().all(|v| v.is_finite()) {
                    Ok(x)
                } else {
                    Err(Error::LinearSolve { reason: "non-finite solution".into(), residual: f64::NAN })
                }
            }
            Factorization::Iterative { matrix, precond, opts } => {
                gmres(matrix, b, None, precond, *opts).map(|(x, _)| x)
            }
        }
    }
}

/// Linear solver front-end. Caches the fill-reducing ordering per sparsity pattern, so
/// refactoring a matrix with an unchanged pattern only redoes the numeric phase.
#[derive(Clone, Debug, Default)]
pub struct LinearSolver {
    kind: LinearSolverKind,
    ordering: Option<((usize, usize, usize, u64), Vec<usize>, usize, usize)>,
}

impl LinearSolver {
    pub fn new(kind: LinearSolverKind) -> Self {
        Self { kind, ordering: None }
    }

    pub fn kind(&self) -> LinearSolverKind {
        self.kind
    }

    pub fn factor<T: Real>(&mut self, a: &CsrMatrix<T>) -> Result<Factorization<T>> {
        if !a.all_finite() {
            return Err(Error::LinearSolve { reason: "matrix has non-finite entries".into(), residual: f64::NAN });
        }
        match self.kind {
            LinearSolverKind::Direct => {
                let key = a.pattern_key();
                let cached = matches!(&self.ordering, Some((k, ..)) if *k == key);
                if !cached {
                    let adj = ordering::symmetric_adjacency(a.nrows(), a.row_ptr(), a.col_idx());
                    let perm = ordering::reverse_cuthill_mckee(&adj);
                    let (kl, ku) = ordering::bandwidths(a.nrows(), a.row_ptr(), a.col_idx(), &perm);
                    self.ordering = Some((key, perm, kl, ku));
                }
                let (_, perm, kl, ku) = self.ordering.as_ref().unwrap();
                Ok(Factorization::Direct(BandLu::factor(a, perm, *kl, *ku)?))
            }
            LinearSolverKind::Iterative { rel_tol, restart, max_iter } => Ok(Factorization::Iterative {
                matrix: a.clone(),
                precond: Ilu0::new(a),
                opts: GmresOptions { rel_tol, restart, max_iter },
            }),
        }
    }

    /// Factor and solve, verifying the relative residual of the result.
    pub fn solve<T: Real>(&mut self, a: &CsrMatrix<T>, b: &[T]) -> Result<Vec<T>> {
        let f = self.factor(a)?;
        let x = f.solve(b)?;
        check_residual(a, &x, b)?;
        Ok(x)
    }
}

/// Fails when `‖Ax − b‖ / (‖A‖‖x‖ + ‖b‖)` exceeds `sqrt(eps)`.
pub fn check_residual<T: Real>(a: &CsrMatrix<T>, x: &[T], b: &[T]) -> Result<f64> {
    let ax = a.mul_vec(x);
    let r: T = ax.iter().zip(b).map(|(&p, &q)| (p - q) * (p - q)).sum::<T>().sqrt();
    let scale = a.max_abs() * sparse::norm2(x) + sparse::norm2(b);
    let rel = if scale > T::zero() { (r / scale).to_f64_lossy() } else { 0.0 };
    let limit = T::epsilon().sqrt().to_f64_lossy();
    if !rel.is_finite() || rel > limit {
        return Err(Error::LinearSolve { reason: "residual check failed".into(), residual: rel });
    }
    Ok(rel)
}
