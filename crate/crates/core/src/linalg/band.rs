//! Banded LU factorization with partial pivoting, used as the sparse direct solver
//! after a bandwidth-reducing permutation.

use crate::error::{Error, Result};
use crate::linalg::sparse::CsrMatrix;
use crate::scalar::Real;

/// LU factors of `P A Pᵀ` where `P` is the symmetric permutation `perm[new] = old`.
#[derive(Clone, Debug)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    ab: Vec<T>,
    piv: Vec<usize>,
    perm: Vec<usize>,
}

impl<T: Real> BandLu<T> {
    /// Factors `a` in the ordering `perm`; `kl`/`ku` are the bandwidths of the permuted matrix.
    pub fn factor(a: &CsrMatrix<T>, perm: &[usize], kl: usize, ku: usize) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "band LU needs a square matrix");
        // pivoting widens the upper band to kl + ku
        let width = 2 * kl + ku + 1;
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut ab = vec![T::zero(); n * width];
        for old_i in 0..n {
            let i = inv[old_i];
            let (cols, vals) = a.row(old_i);
            for (&c, &v) in cols.iter().zip(vals) {
                let j = inv[c];
                ab[i * width + (j + kl - i)] += v;
            }
        }
        let mut lu = Self { n, kl, ku, width, ab, piv: vec![0; n], perm: perm.to_vec() };
        lu.factor_in_place()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn factor_in_place(&mut self) -> Result<()> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        // Singularity is judged per column: penalty rows can be many orders of magnitude
        // larger than the pressure block, which a global threshold would flag in f32.
        let mut col_scale = vec![T::zero(); n];
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = self.ab[self.idx(i, j)].abs();
                col_scale[j] = col_scale[j].max(v);
            }
        }
        for k in 0..n {
            let tiny = col_scale[k] * T::epsilon() * T::lit(1e-3);
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.ab[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.ab[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) || best == T::zero() {
                return Err(Error::Singular(k));
            }
            self.piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[self.idx(k, k)];
            let krow = k * self.width;
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let l = self.ab[ik] / pivot;
                self.ab[ik] = l;
                if l == T::zero() {
                    continue;
                }
                let irow = i * self.width;
                for j in k + 1..=last_col {
                    let kv = self.ab[krow + (j + kl - k)];
                    self.ab[irow + (j + kl - i)] -= l * kv;
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut x: Vec<T> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != T::zero() {
                for i in k + 1..=(k + kl).min(n - 1) {
                    x[i] -= self.ab[self.idx(i, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                acc -= self.ab[self.idx(k, j)] * x[j];
            }
            x[k] = acc / self.ab[self.idx(k, k)];
        }
        let mut out = vec![T::zero(); n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }
}
