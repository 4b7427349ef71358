//! Point location by uniform bucketing of cell bounding boxes.

use crate::scalar::vec3::{self, Vec3};
use crate::scalar::Real;

use super::{CellShape, Mesh};

/// Finds the cell containing a point and its barycentric coordinates.
pub struct PointLocator<'m, T> {
    mesh: &'m Mesh<T>,
    shapes: Vec<CellShape<T>>,
    lo: [f64; 3],
    size: [f64; 3],
    dims: [usize; 3],
    buckets: Vec<Vec<usize>>,
}

/// Location result: cell id and the `dim + 1` barycentric coordinates (unused slots zero).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Located<T> {
    pub cell: usize,
    pub bary: [T; 4],
}

impl<'m, T: Real> PointLocator<'m, T> {
    pub fn new(mesh: &'m Mesh<T>) -> Self {
        let dim = mesh.dim();
        let (lo, hi) = mesh.bounding_box();
        let lo = lo.map(|x| x.to_f64_lossy());
        let hi = hi.map(|x| x.to_f64_lossy());
        let n = mesh.num_cells().max(1) as f64;
        let per_axis = n.powf(1.0 / dim as f64).ceil().max(1.0) as usize;
        let mut dims = [1usize; 3];
        let mut size = [1.0; 3];
        for k in 0..dim {
            dims[k] = per_axis;
            let ext = (hi[k] - lo[k]).max(1e-300);
            size[k] = ext / per_axis as f64;
        }
        let mut buckets = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        let shapes: Vec<CellShape<T>> = (0..mesh.num_cells()).map(|c| mesh.cell_shape(c)).collect();
        let bucket_of = |x: f64, k: usize| -> usize {
            (((x - lo[k]) / size[k]).floor().max(0.0) as usize).min(dims[k] - 1)
        };
        for c in 0..mesh.num_cells() {
            let mut a = [0usize; 3];
            let mut b = [0usize; 3];
            for k in 0..dim {
                let xs = mesh.cell(c).iter().map(|&v| mesh.vertex(v)[k].to_f64_lossy());
                let (mn, mx) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
                let pad = 1e-9 * size[k];
                a[k] = bucket_of(mn - pad, k);
                b[k] = bucket_of(mx + pad, k);
            }
            for i in a[0]..=b[0] {
                for j in a[1]..=b[1] {
                    for l in a[2]..=b[2] {
                        buckets[(l * dims[1] + j) * dims[0] + i].push(c);
                    }
                }
            }
        }
        Self { mesh, shapes, lo, size, dims, buckets }
    }

    pub fn mesh(&self) -> &'m Mesh<T> {
        self.mesh
    }

    /// Barycentric coordinates of `p` with respect to cell `c`.
    pub fn barycentric(&self, c: usize, p: &Vec3<T>) -> [T; 4] {
        let dim = self.mesh.dim();
        let v0 = self.mesh.vertex(self.mesh.cell(c)[0]);
        let d = vec3::sub(p, v0);
        let g = &self.shapes[c].grads;
        let mut bary = [T::zero(); 4];
        let mut rest = T::one();
        for k in 1..=dim {
            bary[k] = vec3::dot(&g[k], &d);
            rest -= bary[k];
        }
        bary[0] = rest;
        bary
    }

    fn bucket_range(&self, p: &Vec3<T>, k: usize, reach: usize) -> Option<(usize, usize)> {
        let x = (p[k].to_f64_lossy() - self.lo[k]) / self.size[k];
        let n = self.dims[k] as f64;
        if x < -(reach as f64) - 1e-9 || x > n + reach as f64 + 1e-9 {
            return None;
        }
        let i = x.floor().clamp(0.0, n - 1.0) as usize;
        Some((i.saturating_sub(reach), (i + reach).min(self.dims[k] - 1)))
    }

    fn best_candidate(&self, p: &Vec3<T>, reach: usize) -> Option<(usize, [T; 4], T)> {
        let dim = self.mesh.dim();
        let mut ranges = [(0usize, 0usize); 3];
        for k in 0..dim {
            ranges[k] = self.bucket_range(p, k, reach)?;
        }
        let mut best: Option<(usize, [T; 4], T)> = None;
        for l in ranges[2].0..=ranges[2].1 {
            for j in ranges[1].0..=ranges[1].1 {
                for i in ranges[0].0..=ranges[0].1 {
                    for &c in &self.buckets[(l * self.dims[1] + j) * self.dims[0] + i] {
                        let b = self.barycentric(c, p);
                        let worst = b[..=dim].iter().fold(T::infinity(), |a, &x| a.min(x));
                        if best.as_ref().map_or(true, |(_, _, w)| worst > *w) {
                            best = Some((c, b, worst));
                        }
                    }
                }
            }
        }
        best
    }

    /// Cell containing `p` (boundary points included up to round-off).
    pub fn locate(&self, p: &Vec3<T>) -> Option<Located<T>> {
        self.locate_with_slack(p, T::zero())
    }

    /// Like [`locate`](Self::locate) but also accepts points up to `slack` (in barycentric
    /// units) outside the mesh; the coordinates are then clamped onto the nearest cell.
    pub fn locate_with_slack(&self, p: &Vec3<T>, slack: T) -> Option<Located<T>> {
        let dim = self.mesh.dim();
        let tol = T::epsilon().sqrt() * T::lit(1e-2) + slack;
        let reach = if slack > T::zero() { 1 } else { 0 };
        let (cell, mut bary, worst) = self.best_candidate(p, reach)?;
        if worst < -tol {
            return None;
        }
        if worst < T::zero() {
            let mut s = T::zero();
            for b in bary[..=dim].iter_mut() {
                *b = b.max(T::zero());
                s += *b;
            }
            for b in bary[..=dim].iter_mut() {
                *b /= s;
            }
        }
        Some(Located { cell, bary })
    }

    /// Interpolates a nodal field with `ncomp` interleaved components at `p`.
    pub fn interpolate(&self, at: &Located<T>, values: &[T], ncomp: usize, out: &mut [T]) {
        for o in out.iter_mut().take(ncomp) {
            *o = T::zero();
        }
        for (k, &v) in self.mesh.cell(at.cell).iter().enumerate() {
            for c in 0..ncomp {
                out[c] += at.bary[k] * values[v * ncomp + c];
            }
        }
    }
}
