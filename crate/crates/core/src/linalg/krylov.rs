//! Restarted GMRES with an ILU(0) right preconditioner.

use crate::error::{Error, Result};
use crate::linalg::sparse::{norm2, CsrMatrix};
use crate::scalar::Real;

/// Incomplete LU with zero fill on the pattern of `A`.
#[derive(Clone, Debug)]
pub struct Ilu0<T> {
    lu: CsrMatrix<T>,
    diag: Vec<usize>,
}

impl<T: Real> Ilu0<T> {
    pub fn new(a: &CsrMatrix<T>) -> Self {
        let n = a.nrows();
        let mut lu = a.clone();
        let rp = lu.row_ptr().to_vec();
        let ci = lu.col_idx().to_vec();
        let scale = a.max_abs();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in rp[i]..rp[i + 1] {
                if ci[k] == i {
                    diag[i] = k;
                }
            }
        }
        let vals = lu.values_mut();
        let floor = scale * T::lit(1e-10);
        for i in 0..n {
            for kk in rp[i]..rp[i + 1] {
                let k = ci[kk];
                if k >= i {
                    break;
                }
                let dk = diag[k];
                if dk == usize::MAX {
                    continue;
                }
                let l = vals[kk] / vals[dk];
                vals[kk] = l;
                // subtract l * U(k, j) for j > k present in row i
                let mut p = kk + 1;
                for q in dk + 1..rp[k + 1] {
                    let j = ci[q];
                    while p < rp[i + 1] && ci[p] < j {
                        p += 1;
                    }
                    if p < rp[i + 1] && ci[p] == j {
                        vals[p] = vals[p] - l * vals[q];
                    }
                }
            }
            if diag[i] != usize::MAX && vals[diag[i]].abs() < floor {
                vals[diag[i]] = if vals[diag[i]] < T::zero() { -floor } else { floor };
            }
        }
        Self { lu, diag }
    }

    pub fn apply(&self, b: &[T]) -> Vec<T> {
        let n = b.len();
        let mut x = b.to_vec();
        for i in 0..n {
            let (cols, vals) = self.lu.row(i);
            let mut acc = x[i];
            for (&c, &v) in cols.iter().zip(vals) {
                if c >= i {
                    break;
                }
                acc -= v * x[c];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let (cols, vals) = self.lu.row(i);
            let mut acc = x[i];
            let mut d = T::one();
            for (&c, &v) in cols.iter().zip(vals) {
                if c > i {
                    acc -= v * x[c];
                } else if c == i {
                    d = v;
                }
            }
            x[i] = if self.diag[i] == usize::MAX { acc } else { acc / d };
        }
        x
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    pub rel_tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, restart: 80, max_iter: 4000 }
    }
}

/// Solves `A x = b`; returns the solution and the achieved relative residual.
pub fn gmres<T: Real>(
    a: &CsrMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    precond: &Ilu0<T>,
    opts: GmresOptions,
) -> Result<(Vec<T>, f64)> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = x0.map_or_else(|| vec![T::zero(); n], |v| v.to_vec());
    if bnorm == T::zero() {
        return Ok((vec![T::zero(); n], 0.0));
    }
    let tol = T::lit(opts.rel_tol) * bnorm;
    let m = opts.restart.max(1);
    let mut iters = 0;
    loop {
        let ax = a.mul_vec(&x);
        let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
        let beta = norm2(&r);
        if beta <= tol {
            return Ok((x, (beta / bnorm).to_f64_lossy()));
        }
        if iters >= opts.max_iter {
            return Err(Error::LinearSolve {
                reason: format!("GMRES did not converge in {iters} iterations"),
                residual: (beta / bnorm).to_f64_lossy(),
            });
        }
        let mut v: Vec<Vec<T>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|&ri| ri / beta).collect());
        let mut h = vec![vec![T::zero(); m]; m + 1];
        let mut cs = vec![T::zero(); m];
        let mut sn = vec![T::zero(); m];
        let mut g = vec![T::zero(); m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for j in 0..m {
            iters += 1;
            let z = precond.apply(&v[j]);
            let mut w = a.mul_vec(&z);
            for i in 0..=j {
                let hij: T = w.iter().zip(&v[i]).map(|(&a, &b)| a * b).sum();
                h[i][j] = hij;
                for (wk, &vk) in w.iter_mut().zip(&v[i]) {
                    *wk -= hij * vk;
                }
            }
            let hn = norm2(&w);
            h[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = (h[j][j] * h[j][j] + h[j + 1][j] * h[j + 1][j]).sqrt();
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = T::zero();
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];
            k_used = j + 1;
            if hn != T::zero() {
                v.push(w.iter().map(|&wk| wk / hn).collect());
            }
            if g[j + 1].abs() <= tol || hn == T::zero() || iters >= opts.max_iter {
                break;
            }
        }
        let mut y = vec![T::zero(); k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for l in i + 1..k_used {
                acc -= h[i][l] * y[l];
            }
            y[i] = acc / h[i][i];
        }
        let mut dx = vec![T::zero(); n];
        for (l, &yl) in y.iter().enumerate() {
            for (d, &vl) in dx.iter_mut().zip(&v[l]) {
                *d += yl * vl;
            }
        }
        let dz = precond.apply(&dx);
        for (xi, &d) in x.iter_mut().zip(&dz) {
            *xi += d;
        }
    }
}
