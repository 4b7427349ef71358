//! Simplicial meshes (triangles in 2D, tetrahedra in 3D) with tagged boundary facets.

mod generate;
mod locate;
mod msh;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::vec3::{self, Vec3};
use crate::scalar::Real;

pub use generate::{
    bifurcation_outlet_normal, generate_bifurcation, generate_bifurcation_with, generate_box_channel,
    generate_channel, BifurcationParams,
};
pub use locate::{Located, PointLocator};
pub use msh::{format_msh, parse_msh, read_msh, write_msh};

/// Boundary tag of the inflow boundary in generated meshes.
pub const INLET_TAG: i32 = 1;
/// Boundary tag of no-slip walls in generated meshes.
pub const WALL_TAG: i32 = 2;

/// Tag of the `m`-th outlet (1-based) in generated meshes.
pub const fn outlet_tag(m: usize) -> i32 {
    2 + m as i32
}

/// Immutable simplicial mesh. Units are centimetres; 2D meshes keep `z = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh<T> {
    dim: usize,
    vertices: Vec<Vec3<T>>,
    cells: Vec<usize>,
    facets: Vec<usize>,
    facet_tags: Vec<i32>,
    facet_cell: Vec<usize>,
}

/// Measure, unit outward normal and in-facet tangent basis of a boundary facet.
#[derive(Clone, Debug, PartialEq)]
pub struct FacetGeometry<T> {
    pub measure: T,
    pub normal: Vec3<T>,
    pub tangents: Vec<Vec3<T>>,
}

/// Measure and barycentric-coordinate gradients of a cell.
#[derive(Clone, Copy, Debug)]
pub struct CellShape<T> {
    pub measure: T,
    pub grads: [Vec3<T>; 4],
}

fn sorted_key(v: &[usize]) -> Vec<usize> {
    let mut k = v.to_vec();
    k.sort_unstable();
    k
}

/// Signed measure of the simplex spanned by `pts` (dim + 1 points).
pub fn signed_measure<T: Real>(dim: usize, pts: &[Vec3<T>]) -> T {
    let e1 = vec3::sub(&pts[1], &pts[0]);
    let e2 = vec3::sub(&pts[2], &pts[0]);
    if dim == 2 {
        (e1[0] * e2[1] - e1[1] * e2[0]) * T::lit(0.5)
    } else {
        let e3 = vec3::sub(&pts[3], &pts[0]);
        vec3::dot(&e1, &vec3::cross(&e2, &e3)) / T::lit(6.0)
    }
}

/// Cell measure and gradients of the P1 basis functions.
pub fn cell_shape<T: Real>(dim: usize, pts: &[Vec3<T>]) -> CellShape<T> {
    let z = vec3::zero();
    let e1 = vec3::sub(&pts[1], &pts[0]);
    let e2 = vec3::sub(&pts[2], &pts[0]);
    let mut grads = [z; 4];
    if dim == 2 {
        let det = e1[0] * e2[1] - e1[1] * e2[0];
        grads[1] = [e2[1] / det, -e2[0] / det, T::zero()];
        grads[2] = [-e1[1] / det, e1[0] / det, T::zero()];
        grads[0] = [-(grads[1][0] + grads[2][0]), -(grads[1][1] + grads[2][1]), T::zero()];
        CellShape { measure: det.abs() * T::lit(0.5), grads }
    } else {
        let e3 = vec3::sub(&pts[3], &pts[0]);
        let c23 = vec3::cross(&e2, &e3);
        let det = vec3::dot(&e1, &c23);
        grads[1] = vec3::scale(&c23, T::one() / det);
        grads[2] = vec3::scale(&vec3::cross(&e3, &e1), T::one() / det);
        grads[3] = vec3::scale(&vec3::cross(&e1, &e2), T::one() / det);
        let s = vec3::add(&vec3::add(&grads[1], &grads[2]), &grads[3]);
        grads[0] = vec3::scale(&s, -T::one());
        CellShape { measure: det.abs() / T::lit(6.0), grads }
    }
}

/// Gradients of the facet's P1 basis functions within the facet plane.
pub fn facet_surface_gradients<T: Real>(pts: &[Vec3<T>]) -> Vec<Vec3<T>> {
    let k = pts.len() - 1;
    let edges: Vec<Vec3<T>> = (1..=k).map(|i| vec3::sub(&pts[i], &pts[0])).collect();
    // metric G = EᵀE, gradient of λ_j = E G⁻¹ e_j
    let mut out = vec![vec3::zero(); k + 1];
    if k == 1 {
        let g = vec3::dot(&edges[0], &edges[0]);
        out[1] = vec3::scale(&edges[0], T::one() / g);
    } else {
        let g11 = vec3::dot(&edges[0], &edges[0]);
        let g12 = vec3::dot(&edges[0], &edges[1]);
        let g22 = vec3::dot(&edges[1], &edges[1]);
        let det = g11 * g22 - g12 * g12;
        let inv = [[g22 / det, -g12 / det], [-g12 / det, g11 / det]];
        for j in 0..2 {
            let a = vec3::scale(&edges[0], inv[0][j]);
            let b = vec3::scale(&edges[1], inv[1][j]);
            out[j + 1] = vec3::add(&a, &b);
        }
    }
    let mut s = vec3::zero();
    for g in &out[1..] {
        s = vec3::add(&s, g);
    }
    out[0] = vec3::scale(&s, -T::one());
    out
}

fn facet_measure_and_normal<T: Real>(pts: &[Vec3<T>]) -> (T, Vec3<T>, Vec<Vec3<T>>) {
    let t1 = vec3::sub(&pts[1], &pts[0]);
    if pts.len() == 2 {
        let len = vec3::norm(&t1);
        let t = vec3::scale(&t1, T::one() / len);
        (len, [t[1], -t[0], T::zero()], vec![t])
    } else {
        let t2 = vec3::sub(&pts[2], &pts[0]);
        let c = vec3::cross(&t1, &t2);
        let area2 = vec3::norm(&c);
        let n = vec3::scale(&c, T::one() / area2);
        let a = vec3::normalize(&t1);
        let b = vec3::cross(&n, &a);
        (area2 * T::lit(0.5), n, vec![a, b])
    }
}

impl<T: Real> Mesh<T> {
    /// Builds a mesh from cells and explicitly tagged boundary facets, validating that the
    /// tags partition the boundary.
    pub fn new(
        dim: usize,
        vertices: Vec<Vec3<T>>,
        cells: Vec<usize>,
        tagged_facets: Vec<(Vec<usize>, i32)>,
    ) -> Result<Self> {
        let mut mesh = Self::bare(dim, vertices, cells)?;
        let boundary = mesh.boundary_facet_map();
        let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
        for (k, (f, tag)) in tagged_facets.iter().enumerate() {
            if f.len() != dim {
                return Err(Error::InvalidMesh(format!("facet {k} has {} vertices, expected {dim}", f.len())));
            }
            let key = sorted_key(f);
            let Some(&cell) = boundary.get(&key) else {
                return Err(Error::InteriorFacet(format!("{f:?}")));
            };
            if let Some(prev) = seen.insert(key, k) {
                if tagged_facets[prev].1 != *tag {
                    return Err(Error::InvalidMesh(format!("facet {f:?} carries more than one tag")));
                }
                continue;
            }
            mesh.facets.extend_from_slice(f);
            mesh.facet_tags.push(*tag);
            mesh.facet_cell.push(cell);
        }
        if seen.len() != boundary.len() {
            let mut missing: Vec<Vec<usize>> =
                boundary.keys().filter(|k| !seen.contains_key(*k)).cloned().collect();
            missing.sort();
            let listed: Vec<String> = missing.iter().take(8).map(|f| format!("{f:?}")).collect();
            return Err(Error::UntaggedFacets(format!(
                "{} boundary facet(s) without a tag: {}{}",
                missing.len(),
                listed.join(", "),
                if missing.len() > 8 { ", ..." } else { "" }
            )));
        }
        Ok(mesh)
    }

    /// Builds a mesh and tags each boundary facet with `classify(facet_vertices, midpoint)`.
    pub fn with_classifier<F>(dim: usize, vertices: Vec<Vec3<T>>, cells: Vec<usize>, classify: F) -> Result<Self>
    where
        F: Fn(&[usize], &Vec3<T>) -> i32,
    {
        let mut mesh = Self::bare(dim, vertices, cells)?;
        let mut list: Vec<(Vec<usize>, usize)> = Vec::new();
        for c in 0..mesh.num_cells() {
            let cv = mesh.cell(c).to_vec();
            for skip in 0..=dim {
                let f: Vec<usize> = (0..=dim).filter(|&i| i != skip).map(|i| cv[i]).collect();
                list.push((f, c));
            }
        }
        let mut count: HashMap<Vec<usize>, usize> = HashMap::new();
        for (f, _) in &list {
            *count.entry(sorted_key(f)).or_insert(0) += 1;
        }
        for (f, c) in list {
            if count[&sorted_key(&f)] == 1 {
                let mid = mesh.centroid_of(&f);
                let tag = classify(&f, &mid);
                mesh.facets.extend_from_slice(&f);
                mesh.facet_tags.push(tag);
                mesh.facet_cell.push(c);
            }
        }
        Ok(mesh)
    }

    fn bare(dim: usize, vertices: Vec<Vec3<T>>, mut cells: Vec<usize>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidMesh(format!("dimension must be 2 or 3, got {dim}")));
        }
        if cells.is_empty() || cells.len() % (dim + 1) != 0 {
            return Err(Error::InvalidMesh("cell connectivity is empty or ragged".into()));
        }
        let nv = vertices.len();
        if let Some(&bad) = cells.iter().find(|&&v| v >= nv) {
            return Err(Error::InvalidMesh(format!("cell references vertex {bad} of {nv}")));
        }
        if vertices.iter().any(|p| p.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        if dim == 2 && vertices.iter().any(|p| p[2] != T::zero()) {
            return Err(Error::InvalidMesh("2D mesh with nonzero z coordinate".into()));
        }
        let stride = dim + 1;
        for (c, cell) in cells.chunks_mut(stride).enumerate() {
            let pts: Vec<Vec3<T>> = cell.iter().map(|&v| vertices[v]).collect();
            let m = signed_measure(dim, &pts);
            let scale = pts
                .iter()
                .skip(1)
                .map(|p| vec3::norm(&vec3::sub(p, &pts[0])))
                .fold(T::zero(), |a, b| a.max(b));
            if !(m.abs() > scale.powi(dim as i32) * T::epsilon() * T::lit(16.0)) {
                return Err(Error::InvalidMesh(format!("cell {c} is degenerate")));
            }
            if m < T::zero() {
                cell.swap(0, 1);
            }
        }
        Ok(Self { dim, vertices, cells, facets: Vec::new(), facet_tags: Vec::new(), facet_cell: Vec::new() })
    }

    fn boundary_facet_map(&self) -> HashMap<Vec<usize>, usize> {
        let mut count: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
        for c in 0..self.num_cells() {
            let cv = self.cell(c);
            for skip in 0..=self.dim {
                let f: Vec<usize> = (0..=self.dim).filter(|&i| i != skip).map(|i| cv[i]).collect();
                let e = count.entry(sorted_key(&f)).or_insert((0, c));
                e.0 += 1;
            }
        }
        count.into_iter().filter(|(_, (n, _))| *n == 1).map(|(k, (_, c))| (k, c)).collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn num_boundary_facets(&self) -> usize {
        self.facet_tags.len()
    }

    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    /// Cell connectivity, `dim + 1` vertex indices per cell.
    pub fn cells_flat(&self) -> &[usize] {
        &self.cells
    }

    pub fn vertex(&self, v: usize) -> &Vec3<T> {
        &self.vertices[v]
    }

    #[inline]
    pub fn cell(&self, c: usize) -> &[usize] {
        let s = self.dim + 1;
        &self.cells[c * s..(c + 1) * s]
    }

    #[inline]
    pub fn facet(&self, f: usize) -> &[usize] {
        &self.facets[f * self.dim..(f + 1) * self.dim]
    }

    pub fn facet_tag(&self, f: usize) -> i32 {
        self.facet_tags[f]
    }

    /// Cell adjacent to boundary facet `f`.
    pub fn facet_cell(&self, f: usize) -> usize {
        self.facet_cell[f]
    }

    /// Distinct boundary tags in ascending order.
    pub fn tags(&self) -> Vec<i32> {
        let mut t = self.facet_tags.clone();
        t.sort_unstable();
        t.dedup();
        t
    }

    pub fn facets_with_tag(&self, tag: i32) -> Vec<usize> {
        (0..self.num_boundary_facets()).filter(|&f| self.facet_tags[f] == tag).collect()
    }

    /// Sorted vertex ids touching facets with the given tag.
    pub fn vertices_with_tag(&self, tag: i32) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .facets_with_tag(tag)
            .into_iter()
            .flat_map(|f| self.facet(f).to_vec())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn points_of(&self, ids: &[usize]) -> Vec<Vec3<T>> {
        ids.iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn centroid_of(&self, ids: &[usize]) -> Vec3<T> {
        let mut c = vec3::zero();
        for &v in ids {
            c = vec3::add(&c, &self.vertices[v]);
        }
        vec3::scale(&c, T::one() / T::from_usize_lossy(ids.len()))
    }

    pub fn cell_shape(&self, c: usize) -> CellShape<T> {
        cell_shape(self.dim, &self.points_of(self.cell(c)))
    }

    pub fn cell_measure(&self, c: usize) -> T {
        self.cell_shape(c).measure
    }

    pub fn cell_centroid(&self, c: usize) -> Vec3<T> {
        self.centroid_of(self.cell(c))
    }

    /// Longest edge of the cell.
    pub fn cell_diameter(&self, c: usize) -> T {
        let pts = self.points_of(self.cell(c));
        let mut h = T::zero();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                h = h.max(vec3::norm(&vec3::sub(&pts[i], &pts[j])));
            }
        }
        h
    }

    pub fn total_measure(&self) -> T {
        (0..self.num_cells()).map(|c| self.cell_measure(c)).sum()
    }

    pub fn max_cell_diameter(&self) -> T {
        (0..self.num_cells()).map(|c| self.cell_diameter(c)).fold(T::zero(), |a, b| a.max(b))
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Vec3<T>, Vec3<T>) {
        let mut lo = [T::infinity(); 3];
        let mut hi = [T::neg_infinity(); 3];
        for p in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Geometry of boundary facet `f` (index into the boundary facet list).
    pub fn facet_geometry(&self, f: usize) -> Result<FacetGeometry<T>> {
        if f >= self.num_boundary_facets() {
            return Err(Error::InteriorFacet(format!("id {f}")));
        }
        let pts = self.points_of(self.facet(f));
        let (measure, mut normal, tangents) = facet_measure_and_normal(&pts);
        let fc = self.centroid_of(self.facet(f));
        let cc = self.cell_centroid(self.facet_cell[f]);
        if vec3::dot(&normal, &vec3::sub(&fc, &cc)) < T::zero() {
            normal = vec3::scale(&normal, -T::one());
        }
        Ok(FacetGeometry { measure, normal, tangents })
    }

    /// Geometry of the boundary facet with the given vertices; interior facets are an error.
    pub fn facet_geometry_of(&self, verts: &[usize]) -> Result<FacetGeometry<T>> {
        let key = sorted_key(verts);
        let f = (0..self.num_boundary_facets())
            .find(|&f| sorted_key(self.facet(f)) == key)
            .ok_or_else(|| Error::InteriorFacet(format!("{verts:?}")))?;
        self.facet_geometry(f)
    }

    /// Vertex adjacency (vertices sharing a cell), sorted, including the vertex itself.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.num_vertices()];
        for c in 0..self.num_cells() {
            let cv = self.cell(c);
            for &a in cv {
                adj[a].extend_from_slice(cv);
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn right_edge_normal_of_unit_square() {
        let m = generate_channel::<f64>(1.0, 1.0, 1, 1).unwrap();
        let f = m.facets_with_tag(outlet_tag(1))[0];
        let g = m.facet_geometry(f).unwrap();
        assert!((g.normal[0] - 1.0).abs() < 1e-15 && g.normal[1].abs() < 1e-15);
        assert!((g.measure - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hypotenuse_normal() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let m = Mesh::with_classifier(2, v, vec![0, 1, 2], |_, _| 1).unwrap();
        let g = m.facet_geometry_of(&[1, 2]).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((g.normal[0] - s).abs() < 1e-15 && (g.normal[1] - s).abs() < 1e-15);
        assert!((g.measure - 2f64.sqrt()).abs() < 1e-15);
        assert!(vec3::dot(&g.normal, &g.tangents[0]).abs() < 1e-15);
    }

    #[test]
    fn tetra_facet_normal_points_up_when_cell_is_below() {
        let v = vec![[0.0f64, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]];
        let m = Mesh::with_classifier(3, v, vec![0, 1, 2, 3], |_, _| 1).unwrap();
        let g = m.facet_geometry_of(&[0, 1, 2]).unwrap();
        assert!((g.normal[2] - 1.0).abs() < 1e-15);
        assert!((g.measure - 0.5).abs() < 1e-15);
        for t in &g.tangents {
            assert!(vec3::dot(t, &g.normal).abs() < 1e-15);
            assert!((vec3::norm(t) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn interior_facet_is_rejected() {
        let m = generate_channel::<f64>(1.0, 1.0, 1, 1).unwrap();
        // the diagonal of the split square is interior
        let c0 = m.cell(0).to_vec();
        let c1 = m.cell(1).to_vec();
        let shared: Vec<usize> = c0.iter().copied().filter(|v| c1.contains(v)).collect();
        assert!(matches!(m.facet_geometry_of(&shared), Err(Error::InteriorFacet(_))));
        assert!(matches!(m.facet_geometry(99), Err(Error::InteriorFacet(_))));
    }

    #[test]
    fn cells_are_reoriented_positive() {
        let v = vec![[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]];
        let m = Mesh::with_classifier(2, v, vec![0, 1, 2], |_, _| 1).unwrap();
        assert!(signed_measure(2, &m.points_of(m.cell(0))) > 0.0);
    }

    #[test]
    fn missing_tag_is_reported() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let err = Mesh::new(2, v, vec![0, 1, 2], vec![(vec![0, 1], 1), (vec![1, 2], 1)]).unwrap_err();
        match err {
            Error::UntaggedFacets(msg) => assert!(msg.contains("[0, 2]"), "{msg}"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn surface_gradients_of_segment() {
        let g = facet_surface_gradients(&[[0.0f64, 0.0, 0.0], [0.0, 2.0, 0.0]]);
        assert!((g[1][1] - 0.5).abs() < 1e-15 && (g[0][1] + 0.5).abs() < 1e-15);
    }
}
