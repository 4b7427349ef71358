//! Small dense kernels for the p×p matrices of the parameter filter.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn diagonal(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }

    /// Lower Cholesky factor `L` with `L Lᵀ = self`.
    pub fn cholesky(&self) -> Result<Self> {
        let n = self.n;
        let mut l = Self::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) {
                return Err(Error::InvalidInput(format!(
                    "matrix not positive definite (pivot {j} = {d})"
                )));
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }

    /// Inverse of a symmetric positive definite matrix via Cholesky.
    pub fn spd_inverse(&self) -> Result<Self> {
        let l = self.cholesky()?;
        let n = self.n;
        let mut inv = Self::zeros(n);
        for col in 0..n {
            let mut e = vec![T::zero(); n];
            e[col] = T::one();
            let y = forward_subst(&l, &e);
            let x = backward_subst_transposed(&l, &y);
            for i in 0..n {
                inv[(i, col)] = x[i];
            }
        }
        // symmetrize round-off
        for i in 0..n {
            for j in 0..i {
                let m = (inv[(i, j)] + inv[(j, i)]) * T::lit(0.5);
                inv[(i, j)] = m;
                inv[(j, i)] = m;
            }
        }
        Ok(inv)
    }

    /// Ratio of extreme diagonal entries of the Cholesky factor, squared: a cheap
    /// condition estimate for SPD matrices.
    pub fn condition_estimate(&self) -> T {
        match self.cholesky() {
            Ok(l) => {
                let d: Vec<T> = (0..self.n).map(|i| l[(i, i)]).collect();
                let mx = d.iter().fold(T::zero(), |m, &v| m.max(v));
                let mn = d.iter().fold(T::infinity(), |m, &v| m.min(v));
                (mx / mn) * (mx / mn)
            }
            Err(_) => T::infinity(),
        }
    }
}

pub fn forward_subst<T: Real>(l: &DenseMatrix<T>, b: &[T]) -> Vec<T> {
    let n = l.n;
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// Solves `Lᵀ x = y`.
pub fn backward_subst_transposed<T: Real>(l: &DenseMatrix<T>, y: &[T]) -> Vec<T> {
    let n = l.n;
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}
