//! Structured generators for the canonical test geometries.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::vec3::{self, Vec3};
use crate::scalar::Real;

use super::{outlet_tag, Mesh, INLET_TAG, WALL_TAG};

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive, got {v}")))
    }
}

/// Rectangle `[0, length] × [0, height]`, each grid square split into two triangles.
/// Inlet on the left edge, walls on top and bottom, outlet 1 on the right edge.
pub fn generate_channel<T: Real>(length: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh<T>> {
    positive("length", length)?;
    positive("height", height)?;
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("nx and ny must be at least 1".into()));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = length * i as f64 / nx as f64;
            let y = height * j as f64 / ny as f64;
            vertices.push([T::lit(x), T::lit(y), T::zero()]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(6 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            cells.extend_from_slice(&[a, b, c, a, c, d]);
        }
    }
    let (lx, ly) = (length, height);
    Mesh::with_classifier(2, vertices, cells, move |_, mid: &Vec3<T>| {
        let (x, y) = (mid[0].to_f64_lossy(), mid[1].to_f64_lossy());
        let tol = 1e-9 * lx.max(ly);
        if x < tol {
            INLET_TAG
        } else if (x - lx).abs() < tol {
            outlet_tag(1)
        } else {
            let _ = y;
            WALL_TAG
        }
    })
}

/// Box `[0, length] × [0, height] × [0, depth]`, each grid cube split into six tetrahedra.
/// Inlet at `x = 0`, outlet 1 at `x = length`, walls elsewhere.
pub fn generate_box_channel<T: Real>(
    length: f64,
    height: f64,
    depth: f64,
    n: [usize; 3],
) -> Result<Mesh<T>> {
    positive("length", length)?;
    positive("height", height)?;
    positive("depth", depth)?;
    let [nx, ny, nz] = n;
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::InvalidInput("cell counts must be at least 1".into()));
    }
    let id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([
                    T::lit(length * i as f64 / nx as f64),
                    T::lit(height * j as f64 / ny as f64),
                    T::lit(depth * k as f64 / nz as f64),
                ]);
            }
        }
    }
    // Kuhn subdivision: every tet contains the main diagonal v0 -> v7, which keeps
    // neighbouring cubes conforming.
    const PATHS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut cells = Vec::with_capacity(24 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for path in PATHS {
                    let mut c = [i, j, k];
                    cells.push(id(c[0], c[1], c[2]));
                    for axis in path {
                        c[axis] += 1;
                        cells.push(id(c[0], c[1], c[2]));
                    }
                }
            }
        }
    }
    let lx = length;
    let scale = length.max(height).max(depth);
    Mesh::with_classifier(3, vertices, cells, move |_, mid: &Vec3<T>| {
        let x = mid[0].to_f64_lossy();
        let tol = 1e-9 * scale;
        if x < tol {
            INLET_TAG
        } else if (x - lx).abs() < tol {
            outlet_tag(1)
        } else {
            WALL_TAG
        }
    })
}

/// Shape parameters of the Y-shaped bifurcation beyond the four basic lengths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BifurcationParams {
    /// Half-angle between the branches and the trunk axis, in degrees.
    pub angle_deg: f64,
    /// Branch width relative to the trunk width.
    pub branch_width_ratio: f64,
}

impl Default for BifurcationParams {
    fn default() -> Self {
        Self { angle_deg: 30.0, branch_width_ratio: 1.0 }
    }
}

/// Planar symmetric Y-shaped domain: a trunk of width `width` along the x axis splitting
/// into two straight branches. `resolution` is the number of cells across the trunk
/// half-width. Outlet 1 is the upper branch, outlet 2 the lower one.
pub fn generate_bifurcation<T: Real>(
    trunk_len: f64,
    branch_len: f64,
    width: f64,
    resolution: usize,
) -> Result<Mesh<T>> {
    generate_bifurcation_with(trunk_len, branch_len, width, resolution, BifurcationParams::default())
}

struct Builder {
    points: Vec<[f64; 2]>,
    index: HashMap<(i64, i64), usize>,
    quantum: f64,
    cells: Vec<usize>,
}

impl Builder {
    fn vertex(&mut self, p: [f64; 2]) -> usize {
        let key = ((p[0] / self.quantum).round() as i64, (p[1] / self.quantum).round() as i64);
        if let Some(&v) = self.index.get(&key) {
            return v;
        }
        self.points.push(p);
        self.index.insert(key, self.points.len() - 1);
        self.points.len() - 1
    }

    /// Structured block over the bilinear patch with corners `q00, q10, q11, q01`.
    fn block(&mut self, q: [[f64; 2]; 4], ns: usize, nt: usize, mirror: bool) {
        let at = |s: f64, t: f64| -> [f64; 2] {
            let mut p = [0.0; 2];
            for k in 0..2 {
                p[k] = (1.0 - s) * (1.0 - t) * q[0][k] + s * (1.0 - t) * q[1][k] + s * t * q[2][k]
                    + (1.0 - s) * t * q[3][k];
            }
            if mirror {
                p[1] = -p[1];
            }
            p
        };
        let mut ids = vec![0usize; (ns + 1) * (nt + 1)];
        for j in 0..=nt {
            for i in 0..=ns {
                ids[j * (ns + 1) + i] = self.vertex(at(i as f64 / ns as f64, j as f64 / nt as f64));
            }
        }
        for j in 0..nt {
            for i in 0..ns {
                let a = ids[j * (ns + 1) + i];
                let b = ids[j * (ns + 1) + i + 1];
                let c = ids[(j + 1) * (ns + 1) + i + 1];
                let d = ids[(j + 1) * (ns + 1) + i];
                let dist = |u: usize, v: usize| {
                    let (p, q) = (self.points[u], self.points[v]);
                    (p[0] - q[0]).hypot(p[1] - q[1])
                };
                if dist(a, c) <= dist(b, d) * (1.0 + 1e-12) {
                    self.cells.extend_from_slice(&[a, b, c, a, c, d]);
                } else {
                    self.cells.extend_from_slice(&[a, b, d, b, c, d]);
                }
            }
        }
    }
}

/// [`generate_bifurcation`] with an explicit branch angle and width ratio.
pub fn generate_bifurcation_with<T: Real>(
    trunk_len: f64,
    branch_len: f64,
    width: f64,
    resolution: usize,
    params: BifurcationParams,
) -> Result<Mesh<T>> {
    positive("trunk_len", trunk_len)?;
    positive("branch_len", branch_len)?;
    positive("width", width)?;
    positive("branch_width_ratio", params.branch_width_ratio)?;
    if resolution == 0 {
        return Err(Error::InvalidInput("resolution must be at least 1".into()));
    }
    let theta = params.angle_deg.to_radians();
    let (s, c) = theta.sin_cos();
    let wb = width * params.branch_width_ratio;
    let half = 0.5 * width;
    if !(theta > 0.0) || !(theta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidInput(format!("branch angle {} deg out of (0, 90)", params.angle_deg)));
    }
    // The crotch C sits on the symmetry axis; the outer branch wall continues straight
    // from the trunk corner P0 = (Lt, W/2).
    let crotch = (wb - half * c) / s;
    let q00 = [trunk_len, 0.0];
    let cc = [trunk_len + crotch, 0.0];
    let dd = [cc[0] - wb * s, wb * c];
    let p0 = [trunk_len, half];
    let along = (dd[0] - p0[0]) * c + (dd[1] - p0[1]) * s;
    let quad = [q00, cc, dd, p0];
    let convex = (0..4).all(|k| {
        let (a, b, e) = (quad[k], quad[(k + 1) % 4], quad[(k + 2) % 4]);
        (b[0] - a[0]) * (e[1] - b[1]) - (b[1] - a[1]) * (e[0] - b[0]) > 1e-12 * width * width
    });
    if crotch <= 0.0 || along <= 0.0 || !convex || dd[0] - trunk_len < 0.0 {
        return Err(Error::InvalidInput(format!(
            "degenerate bifurcation: branches overlap for angle {} deg and width ratio {}",
            params.angle_deg, params.branch_width_ratio
        )));
    }
    let h = half / resolution as f64;
    let cells_along = |len: f64| ((len / h).round() as usize).max(1);
    let n_trunk = cells_along(trunk_len);
    let n_cross = resolution;
    let n_junction = cells_along(crotch.max((dd[0] - p0[0]).hypot(dd[1] - p0[1])));
    let n_branch = ((branch_len / (1.5 * h)).round() as usize).max(1);
    let dir = [c, s];
    let end_lo = [cc[0] + branch_len * dir[0], cc[1] + branch_len * dir[1]];
    let end_hi = [dd[0] + branch_len * dir[0], dd[1] + branch_len * dir[1]];

    let mut b = Builder { points: Vec::new(), index: HashMap::new(), quantum: 1e-9 * width, cells: Vec::new() };
    for mirror in [false, true] {
        b.block([[0.0, 0.0], q00, p0, [0.0, half]], n_trunk, n_cross, mirror);
        b.block(quad, n_junction, n_cross, mirror);
        b.block([cc, end_lo, end_hi, dd], n_branch, n_cross, mirror);
    }
    let vertices: Vec<Vec3<T>> = b.points.iter().map(|p| [T::lit(p[0]), T::lit(p[1]), T::zero()]).collect();
    let outlet_center = [0.5 * (end_lo[0] + end_hi[0]), 0.5 * (end_lo[1] + end_hi[1])];
    let tol = 1e-7 * width;
    Mesh::with_classifier(2, vertices, b.cells, move |_, mid: &Vec3<T>| {
        let (x, y) = (mid[0].to_f64_lossy(), mid[1].to_f64_lossy());
        if x.abs() < tol {
            return INLET_TAG;
        }
        let (yy, tag) = if y >= 0.0 { (y, outlet_tag(1)) } else { (-y, outlet_tag(2)) };
        let off = (x - outlet_center[0]) * dir[0] + (yy - outlet_center[1]) * dir[1];
        if off.abs() < tol {
            tag
        } else {
            WALL_TAG
        }
    })
}

/// Outward unit normal of outlet `m` (1 or 2) of a bifurcation with the given angle.
pub fn bifurcation_outlet_normal(angle_deg: f64, m: usize) -> Vec3<f64> {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let n = if m == 1 { [c, s, 0.0] } else { [c, -s, 0.0] };
    vec3::normalize(&n)
}
