//! Compressed-row sparse matrices.

use crate::scalar::Real;

/// Sparse matrix in compressed row layout. Column indices are sorted within each row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed in insertion order,
/// so the resulting matrix is bit-reproducible for a fixed insertion sequence.
#[derive(Clone, Debug)]
pub struct TripletBuilder<T> {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Real> TripletBuilder<T> {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> CsrMatrix<T> {
        // stable sort keeps the summation order of duplicates deterministic
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<T> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                let lv = values.last_mut().unwrap();
                *lv += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, row_ptr, col_idx, values }
    }
}

impl<T: Real> CsrMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn from_dense(rows: &[Vec<T>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut b = TripletBuilder::new(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    b.push(i, j, v);
                }
            }
        }
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Column indices and values of one row.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in mat-vec");
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            let (cols, vals) = self.row(i);
            let mut acc = T::zero();
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            *yi = acc;
        }
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[T], y: &[T]) -> T {
        let ay = self.mul_vec(y);
        x.iter().zip(&ay).map(|(&a, &b)| a * b).sum()
    }

    pub fn quadratic_form(&self, x: &[T]) -> T {
        self.bilinear(x, x)
    }

    pub fn transpose(&self) -> Self {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                b.push(c, i, v);
            }
        }
        b.build()
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `‖A − Aᵀ‖_max < 1e-12 · ‖A‖_max`.
    pub fn is_symmetric(&self) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let tol = T::lit(1e-12) * self.max_abs();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if (v - self.get(c, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] += v;
            }
        }
        d
    }

    /// Sum of `coeff_k · A_k` over matrices of equal shape.
    pub fn linear_combination(terms: &[(T, &CsrMatrix<T>)]) -> Self {
        let (nrows, ncols) = terms.first().map_or((0, 0), |(_, m)| (m.nrows, m.ncols));
        let cap = terms.iter().map(|(_, m)| m.nnz()).sum();
        let mut b = TripletBuilder::with_capacity(nrows, ncols, cap);
        for (s, m) in terms {
            assert_eq!((m.nrows, m.ncols), (nrows, ncols), "shape mismatch in combination");
            for i in 0..m.nrows {
                let (cols, vals) = m.row(i);
                for (&c, &v) in cols.iter().zip(vals) {
                    b.push(i, c, *s * v);
                }
            }
        }
        b.build()
    }

    /// Adds `alpha · other` placed at `(row_off, col_off)`. The target pattern must already
    /// contain every entry of `other`.
    pub fn add_block(&mut self, alpha: T, other: &CsrMatrix<T>, row_off: usize, col_off: usize) {
        for i in 0..other.nrows {
            let (ocols, ovals) = other.row(i);
            let r = i + row_off;
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let cols = &self.col_idx[a..b];
            for (&c, &v) in ocols.iter().zip(ovals) {
                let k = cols
                    .binary_search(&(c + col_off))
                    .expect("target pattern does not contain block entry");
                self.values[a + k] += alpha * v;
            }
        }
    }

    /// Allocates a zero matrix whose pattern is the union of the given blocks
    /// `(matrix, row_offset, col_offset)`.
    pub fn pattern_union(nrows: usize, ncols: usize, blocks: &[(&CsrMatrix<T>, usize, usize)]) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nrows];
        for (m, ro, co) in blocks {
            for i in 0..m.nrows {
                rows[i + ro].extend(m.row(i).0.iter().map(|c| c + co));
            }
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self { nrows, ncols, row_ptr, col_idx, values: vec![T::zero(); nnz] }
    }

    /// Position of entry `(i, j)` in the value array, if it is part of the pattern.
    #[inline]
    pub fn entry_index(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b].binary_search(&j).ok().map(|k| a + k)
    }

    /// Adds `v` to entry `(i, j)`, which must be part of the pattern.
    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: T) {
        let k = self.entry_index(i, j).expect("entry outside sparsity pattern");
        self.values[k] += v;
    }

    /// Same matrix in another scalar type.
    pub fn cast<U: Real>(&self) -> CsrMatrix<U> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }

    /// Builds a zero matrix with the given sorted column lists per row.
    pub fn from_pattern(ncols: usize, rows: &[Vec<usize>]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for r in rows {
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self { nrows: rows.len(), ncols, row_ptr, col_idx, values: vec![T::zero(); nnz] }
    }

    /// `self += alpha · other` for matrices sharing the exact same pattern.
    pub fn axpy_same_pattern(&mut self, alpha: T, other: &CsrMatrix<T>) {
        assert!(
            self.row_ptr == other.row_ptr && self.col_idx == other.col_idx,
            "pattern mismatch"
        );
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    /// True when both matrices store the same pattern.
    pub fn same_pattern(&self, other: &CsrMatrix<T>) -> bool {
        self.nrows == other.nrows && self.ncols == other.ncols && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    pub fn fill_zero(&mut self) {
        self.values.iter_mut().for_each(|v| *v = T::zero());
    }

    /// Replaces the listed rows by identity rows and zeroes the matching columns.
    /// Used for homogeneous Dirichlet conditions.
    pub fn eliminate_dofs(&mut self, dofs: &[usize]) {
        let mut mask = vec![false; self.nrows.max(self.ncols)];
        for &d in dofs {
            mask[d] = true;
        }
        for i in 0..self.nrows {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            for k in a..b {
                let c = self.col_idx[k];
                if mask[i] || mask[c] {
                    self.values[k] = if i == c { T::one() } else { T::zero() };
                }
            }
        }
    }

    /// Restricts the matrix to the given rows/cols (both sorted index lists).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut b = TripletBuilder::new(rows.len(), cols.len());
        for (ri, &r) in rows.iter().enumerate() {
            let (cs, vs) = self.row(r);
            for (&c, &v) in cs.iter().zip(vs) {
                if col_map[c] != usize::MAX {
                    b.push(ri, col_map[c], v);
                }
            }
        }
        b.build()
    }

    /// Cheap fingerprint of the sparsity pattern, used to reuse orderings.
    pub fn pattern_key(&self) -> (usize, usize, usize, u64) {
        let mut h: u64 = 1469598103934665603;
        for &c in self.col_idx.iter().chain(self.row_ptr.iter()) {
            h ^= c as u64;
            h = h.wrapping_mul(1099511628211);
        }
        (self.nrows, self.ncols, self.nnz(), h)
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
