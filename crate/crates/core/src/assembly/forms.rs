//! Elementwise volume forms. All integrals are exact for P1 fields.

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{CellShape, Mesh};
use crate::scalar::vec3::{self, Vec3};
use crate::scalar::Real;

use super::{DofMap, Field};

/// `∫ λ_a λ_b` over a simplex with `n` vertices and the given measure.
#[inline]
pub(crate) fn p1_mass<T: Real>(measure: T, n: usize, a: usize, b: usize) -> T {
    let denom = T::from_usize_lossy(n * (n + 1));
    if a == b {
        measure * T::lit(2.0) / denom
    } else {
        measure / denom
    }
}

fn scatter_diag<T: Real>(out: &mut CsrMatrix<T>, nc: usize, va: usize, vb: usize, v: T) {
    for c in 0..nc {
        out.add_at(va * nc + c, vb * nc + c, v);
    }
}

fn cell_velocities<T: Real>(dofs: &DofMap, cell: &[usize], w: &[T]) -> [Vec3<T>; 4] {
    let mut out = [vec3::zero(); 4];
    for (k, &v) in cell.iter().enumerate() {
        for c in 0..dofs.dim() {
            out[k][c] = w[dofs.vel(v, c)];
        }
    }
    out
}

/// Consistent P1 mass matrix.
pub fn assemble_mass<T: Real>(mesh: &Mesh<T>, dofs: &DofMap, field: Field) -> CsrMatrix<T> {
    let mut out = dofs.pattern(mesh, field);
    let nc = dofs.ncomp(field);
    let nv = mesh.dim() + 1;
    for c in 0..mesh.num_cells() {
        let cell = mesh.cell(c);
        let m = mesh.cell_measure(c);
        for a in 0..nv {
            for b in 0..nv {
                scatter_diag(&mut out, nc, cell[a], cell[b], p1_mass(m, nv, a, b));
            }
        }
    }
    out
}

/// `coeff ∫ ∇u : ∇v`, block diagonal over components for vector fields.
pub fn assemble_stiffness<T: Real>(mesh: &Mesh<T>, dofs: &DofMap, field: Field, coeff: T) -> CsrMatrix<T> {
    let mut out = dofs.pattern(mesh, field);
    let nc = dofs.ncomp(field);
    let nv = mesh.dim() + 1;
    for c in 0..mesh.num_cells() {
        let cell = mesh.cell(c);
        let CellShape { measure, grads } = mesh.cell_shape(c);
        for a in 0..nv {
            for b in 0..nv {
                let v = coeff * measure * vec3::dot(&grads[a], &grads[b]);
                scatter_diag(&mut out, nc, cell[a], cell[b], v);
            }
        }
    }
    out
}

/// Linearized convection `∫ (w·∇u)·v + ½ (∇·w) u·v` with advecting field `w`.
pub fn assemble_convection<T: Real>(mesh: &Mesh<T>, dofs: &DofMap, w: &[T]) -> CsrMatrix<T> {
    let mut out = dofs.pattern(mesh, Field::Vector);
    assemble_convection_into(mesh, dofs, w, &mut out);
    out
}

/// [`assemble_convection`] into an existing velocity pattern (zeroed first).
pub fn assemble_convection_into<T: Real>(mesh: &Mesh<T>, dofs: &DofMap, w: &[T], out: &mut CsrMatrix<T>) {
    out.fill_zero();
    let d = mesh.dim();
    let nv = d + 1;
    let half = T::lit(0.5);
    for c in 0..mesh.num_cells() {
        let cell = mesh.cell(c);
        let CellShape { measure, grads } = mesh.cell_shape(c);
        let wk = cell_velocities(dofs, cell, w);
        let div: T = (0..nv).map(|k| vec3::dot(&wk[k], &grads[k])).sum();
        for i in 0..nv {
            for j in 0..nv {
                let mut v = half * div * p1_mass(measure, nv, i, j);
                for k in 0..nv {
                    v += vec3::dot(&wk[k], &grads[j]) * p1_mass(measure, nv, k, i);
                }
                scatter_diag(out, d, cell[i], cell[j], v);
            }
        }
    }
}

/// Cellwise streamline-diffusion weight for cell diameter `h` and speed `speed`.
pub fn streamline_coefficient<T: Real>(h: T, speed: T, gamma_sd: T, tau: T, rho: T) -> T {
    let two = T::lit(2.0);
    let a = two / tau;
    let b = two * speed / h;
    gamma_sd * rho / (a * a + b * b).sqrt()
}

/// `Σ_K δ_K ∫_K (w·∇u)·(w·∇v)`.
pub fn assemble_streamline_diffusion<T: Real>(
    mesh: &Mesh<T>,
    dofs: &DofMap,
    w: &[T],
    gamma_sd: T,
    tau: T,
    rho: T,
) -> CsrMatrix<T> {
    let mut out = dofs.pattern(mesh, Field::Vector);
    assemble_streamline_diffusion_into(mesh, dofs, w, gamma_sd, tau, rho, &mut out);
    out
}

/// [`assemble_streamline_diffusion`] into an existing velocity pattern (zeroed first).
pub fn assemble_streamline_diffusion_into<T: Real>(
    mesh: &Mesh<T>,
    dofs: &DofMap,
    w: &[T],
    gamma_sd: T,
    tau: T,
    rho: T,
    out: &mut CsrMatrix<T>,
) {
    out.fill_zero();
    let d = mesh.dim();
    let nv = d + 1;
    for c in 0..mesh.num_cells() {
        let cell = mesh.cell(c);
        let CellShape { measure, grads } = mesh.cell_shape(c);
        let wk = cell_velocities(dofs, cell, w);
        let mut wc = vec3::zero();
        for k in 0..nv {
            wc = vec3::add(&wc, &wk[k]);
        }
        let speed = vec3::norm(&wc) / T::from_usize_lossy(nv);
        let delta = streamline_coefficient(mesh.cell_diameter(c), speed, gamma_sd, tau, rho);
        // a[j][k] = w_k · ∇λ_j, so w·∇λ_j = Σ_k a[j][k] λ_k
        let mut a = [[T::zero(); 4]; 4];
        for j in 0..nv {
            for k in 0..nv {
                a[j][k] = vec3::dot(&wk[k], &grads[j]);
            }
        }
        for i in 0..nv {
            for j in 0..nv {
                let mut v = T::zero();
                for k in 0..nv {
                    for l in 0..nv {
                        v += a[j][k] * a[i][l] * p1_mass(measure, nv, k, l);
                    }
                }
                scatter_diag(out, d, cell[i], cell[j], delta * v);
            }
        }
    }
}

/// Divergence coupling `B` (`n_p × n_u`) with `(Bu)_q = ∫ q ∇·u`.
pub fn assemble_divergence<T: Real>(mesh: &Mesh<T>, dofs: &DofMap) -> CsrMatrix<T> {
    let mut out = dofs.coupling_pattern(mesh);
    let d = mesh.dim();
    let nv = d + 1;
    for c in 0..mesh.num_cells() {
        let cell = mesh.cell(c);
        let CellShape { measure, grads } = mesh.cell_shape(c);
        let w = measure / T::from_usize_lossy(nv);
        for q in 0..nv {
            for j in 0..nv {
                for comp in 0..d {
                    out.add_at(cell[q], dofs.vel(cell[j], comp), grads[j][comp] * w);
                }
            }
        }
    }
    out
}

/// L² pressure gradient `G` (`n_u × n_p`) with `(Gp)·v = ∫ ∇p·v`.
pub fn assemble_gradient<T: Real>(mesh: &Mesh<T>, dofs: &DofMap) -> CsrMatrix<T> {
    let d = mesh.dim();
    let nv = d + 1;
    let mut b = crate::linalg::TripletBuilder::with_capacity(dofs.n_u(), dofs.n_p(), mesh.num_cells() * nv * nv * d);
    for c in 0..mesh.num_cells() {
        let cell = mesh.cell(c);
        let CellShape { measure, grads } = mesh.cell_shape(c);
        let w = measure / T::from_usize_lossy(nv);
        for i in 0..nv {
            for q in 0..nv {
                for comp in 0..d {
                    b.push(dofs.vel(cell[i], comp), cell[q], grads[q][comp] * w);
                }
            }
        }
    }
    b.build()
}

/// Brezzi–Pitkäranta stabilization `Σ_K (γ_p h_K² / μ) ∫_K ∇p·∇q`.
pub fn assemble_pressure_stab<T: Real>(mesh: &Mesh<T>, dofs: &DofMap, gamma_p: T, mu: T) -> CsrMatrix<T> {
    let mut out = dofs.pattern(mesh, Field::Scalar);
    let nv = mesh.dim() + 1;
    for c in 0..mesh.num_cells() {
        let cell = mesh.cell(c);
        let CellShape { measure, grads } = mesh.cell_shape(c);
        let h = mesh.cell_diameter(c);
        let coeff = gamma_p * h * h / mu;
        for a in 0..nv {
            for b in 0..nv {
                out.add_at(cell[a], cell[b], coeff * measure * vec3::dot(&grads[a], &grads[b]));
            }
        }
    }
    out
}

/// Surface mass `∫_Γ u·v` over the given boundary facets, in the pattern of `field`.
pub fn facet_mass<T: Real>(mesh: &Mesh<T>, dofs: &DofMap, field: Field, facets: &[usize]) -> CsrMatrix<T> {
    let mut out = dofs.pattern(mesh, field);
    let nc = dofs.ncomp(field);
    let nv = mesh.dim();
    for &f in facets {
        let fv = mesh.facet(f);
        let m = mesh.facet_geometry(f).expect("boundary facet").measure;
        for a in 0..nv {
            for b in 0..nv {
                scatter_diag(&mut out, nc, fv[a], fv[b], p1_mass(m, nv, a, b));
            }
        }
    }
    out
}

/// Inlet penalization: matrix `γ ∫_Γin u·v` and the unit-amplitude load `∫_Γin g·v`.
#[derive(Clone, Debug)]
pub struct InletPenalty<T> {
    pub matrix: CsrMatrix<T>,
    pub load: Vec<T>,
    pub gamma: T,
}

impl<T: Real> InletPenalty<T> {
    /// Right-hand side `γ f(t) ∫_Γin g·v` for waveform value `f_t`.
    pub fn rhs(&self, f_t: T) -> Vec<T> {
        self.load.iter().map(|&x| self.gamma * f_t * x).collect()
    }
}

/// Penalized inlet condition `u = f(t) g` on facets tagged `tag`.
pub fn assemble_inlet_penalty<T: Real>(
    mesh: &Mesh<T>,
    dofs: &DofMap,
    tag: i32,
    gamma_inlet: T,
    profile: &[T],
) -> Result<InletPenalty<T>> {
    let facets = mesh.facets_with_tag(tag);
    if facets.is_empty() {
        return Err(Error::UnknownTag(tag));
    }
    if profile.len() != dofs.n_u() {
        return Err(Error::InvalidInput("inlet profile length does not match velocity dofs".into()));
    }
    let mass = facet_mass(mesh, dofs, Field::Vector, &facets);
    let load = mass.mul_vec(profile);
    Ok(InletPenalty { matrix: mass.scaled(gamma_inlet), load, gamma: gamma_inlet })
}

/// `‖∇·u‖_{L²}`; the divergence of a P1 field is constant per cell.
pub fn cell_divergence_norm<T: Real>(mesh: &Mesh<T>, dofs: &DofMap, u: &[T]) -> T {
    let nv = mesh.dim() + 1;
    let mut acc = T::zero();
    for c in 0..mesh.num_cells() {
        let cell = mesh.cell(c);
        let CellShape { measure, grads } = mesh.cell_shape(c);
        let wk = cell_velocities(dofs, cell, u);
        let div: T = (0..nv).map(|k| vec3::dot(&wk[k], &grads[k])).sum();
        acc += measure * div * div;
    }
    acc.sqrt()
}

/// `∫_Γ (Q u)·v` where `Q` is built from each facet's outward normal. With `fixed_normal`
/// every facet uses that normal instead of its own.
pub(crate) fn facet_tensor_mass<T, F>(
    mesh: &Mesh<T>,
    dofs: &DofMap,
    facets: &[usize],
    fixed_normal: Option<Vec3<T>>,
    tensor: F,
    out: &mut CsrMatrix<T>,
) where
    T: Real,
    F: Fn(&Vec3<T>) -> [[T; 3]; 3],
{
    let d = mesh.dim();
    for &f in facets {
        let geo = mesh.facet_geometry(f).expect("boundary facet");
        let n = fixed_normal.unwrap_or(geo.normal);
        let q = tensor(&n);
        let fv = mesh.facet(f);
        for a in 0..d {
            for b in 0..d {
                let m = p1_mass(geo.measure, d, a, b);
                for c in 0..d {
                    for e in 0..d {
                        out.add_at(dofs.vel(fv[a], c), dofs.vel(fv[b], e), m * q[c][e]);
                    }
                }
            }
        }
    }
}

/// `I − n nᵀ` scaled by `gamma`.
pub(crate) fn tangential_projector<T: Real>(n: &Vec3<T>, gamma: T) -> [[T; 3]; 3] {
    let mut q = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { T::one() } else { T::zero() };
            q[i][j] = gamma * (id - n[i] * n[j]);
        }
    }
    q
}

/// `n nᵀ` scaled by `gamma`.
pub(crate) fn normal_projector<T: Real>(n: &Vec3<T>, gamma: T) -> [[T; 3]; 3] {
    let mut q = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            q[i][j] = gamma * n[i] * n[j];
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_channel, INLET_TAG};
    use approx::assert_relative_eq;

    fn unit_triangle() -> Mesh<f64> {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        Mesh::with_classifier(2, v, vec![0, 1, 2], |_, _| 1).unwrap()
    }

    #[test]
    fn reference_triangle_mass() {
        let m = unit_triangle();
        let dofs = DofMap::new(&m);
        let a = assemble_mass(&m, &dofs, Field::Scalar).to_dense();
        let exact = [[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[i][j] - exact[i][j] / 24.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn reference_triangle_stiffness() {
        let m = unit_triangle();
        let dofs = DofMap::new(&m);
        let a = assemble_stiffness(&m, &dofs, Field::Scalar, 1.0).to_dense();
        let exact = [[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[i][j] - exact[i][j] / 2.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mass_integrates_constants() {
        let m = generate_channel::<f64>(3.0, 0.5, 7, 3).unwrap();
        let dofs = DofMap::new(&m);
        let mass = assemble_mass(&m, &dofs, Field::Scalar);
        let s: f64 = mass.mul_vec(&vec![2.5; dofs.n_p()]).iter().sum();
        assert_relative_eq!(s, 2.5 * 1.5, max_relative = 1e-13);
        assert!(mass.is_symmetric());
    }

    #[test]
    fn mass_is_positive_definite() {
        let m = generate_channel::<f64>(1.0, 1.0, 4, 1).unwrap();
        assert_eq!(m.num_vertices(), 10);
        let dofs = DofMap::new(&m);
        let dense = assemble_mass(&m, &dofs, Field::Scalar).to_dense();
        let mat = nalgebra::DMatrix::from_fn(10, 10, |i, j| dense[i][j]);
        let eig = mat.symmetric_eigen();
        assert!(eig.eigenvalues.min() > 0.0);
    }

    #[test]
    fn stiffness_kernel_and_linear_energy() {
        let m = generate_channel::<f64>(2.0, 0.5, 8, 3).unwrap();
        let dofs = DofMap::new(&m);
        let k = assemble_stiffness(&m, &dofs, Field::Scalar, 0.7);
        let ones = vec![1.0; dofs.n_p()];
        assert!(k.mul_vec(&ones).iter().all(|x| x.abs() < 1e-12));
        let x: Vec<f64> = m.vertices().iter().map(|p| p[0]).collect();
        assert_relative_eq!(k.quadratic_form(&x), 0.7 * 1.0, max_relative = 1e-10);
    }

    #[test]
    fn convection_vanishes_for_rest_state() {
        let m = generate_channel::<f64>(1.0, 1.0, 3, 3).unwrap();
        let dofs = DofMap::new(&m);
        let c = assemble_convection(&m, &dofs, &vec![0.0; dofs.n_u()]);
        assert_eq!(c.max_abs(), 0.0);
    }

    #[test]
    fn convection_by_constant_field_is_skew_on_interior() {
        let m = generate_channel::<f64>(1.0, 1.0, 3, 3).unwrap();
        let dofs = DofMap::new(&m);
        let w: Vec<f64> = (0..dofs.n_p()).flat_map(|_| [0.8, -0.3]).collect();
        let c = assemble_convection(&m, &dofs, &w);
        let boundary: Vec<usize> = m.tags().into_iter().flat_map(|t| m.vertices_with_tag(t)).collect();
        let v: Vec<f64> = (0..dofs.n_u())
            .map(|i| if boundary.contains(&(i / 2)) { 0.0 } else { (i as f64 * 0.37).sin() })
            .collect();
        assert!(c.quadratic_form(&v).abs() < 1e-10);
    }

    #[test]
    fn convection_of_linear_field() {
        let m = generate_channel::<f64>(2.0, 0.25, 10, 2).unwrap();
        let dofs = DofMap::new(&m);
        let w: Vec<f64> = (0..dofs.n_p()).flat_map(|_| [1.0, 0.0]).collect();
        let c = assemble_convection(&m, &dofs, &w);
        let u: Vec<f64> = m.vertices().iter().flat_map(|p| [p[0], 0.0]).collect();
        let v: Vec<f64> = (0..dofs.n_p()).flat_map(|_| [1.0, 0.0]).collect();
        assert_relative_eq!(c.bilinear(&v, &u), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn divergence_identities() {
        let m = generate_channel::<f64>(1.0, 1.0, 4, 4).unwrap();
        let dofs = DofMap::new(&m);
        let b = assemble_divergence(&m, &dofs);
        let ones = vec![1.0; dofs.n_p()];
        let constant: Vec<f64> = (0..dofs.n_p()).flat_map(|_| [0.3, -1.2]).collect();
        assert!(b.bilinear(&ones, &constant).abs() < 1e-12);
        let saddle: Vec<f64> = m.vertices().iter().flat_map(|p| [p[0], -p[1]]).collect();
        assert!(b.mul_vec(&saddle).iter().all(|x| x.abs() < 1e-14));
        let stretch: Vec<f64> = m.vertices().iter().flat_map(|p| [p[0], 0.0]).collect();
        assert_relative_eq!(b.bilinear(&ones, &stretch), 1.0, max_relative = 1e-13);
    }

    #[test]
    fn gradient_of_linear_pressure() {
        let m = generate_channel::<f64>(1.0, 1.0, 3, 3).unwrap();
        let dofs = DofMap::new(&m);
        let g = assemble_gradient(&m, &dofs);
        let mass = assemble_mass(&m, &dofs, Field::Vector);
        let p: Vec<f64> = m.vertices().iter().map(|v| 2.0 * v[0] - v[1]).collect();
        let e: Vec<f64> = (0..dofs.n_p()).flat_map(|_| [2.0, -1.0]).collect();
        let lhs = g.mul_vec(&p);
        let rhs = mass.mul_vec(&e);
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn pressure_stabilization_scales_with_h_squared() {
        let field = |p: &[f64; 3]| (2.0 * p[0]).sin() + p[1] * p[1];
        let ratio = |n: usize| {
            let m = generate_channel::<f64>(1.0, 1.0, n, n).unwrap();
            let dofs = DofMap::new(&m);
            let s = assemble_pressure_stab(&m, &dofs, 1e-2, 0.035);
            let p: Vec<f64> = m.vertices().iter().map(field).collect();
            s.quadratic_form(&p)
        };
        let (coarse, fine) = (ratio(8), ratio(16));
        assert!((fine / coarse - 0.25).abs() < 0.025, "{}", fine / coarse);
        let m = generate_channel::<f64>(1.0, 1.0, 3, 3).unwrap();
        let dofs = DofMap::new(&m);
        assert_eq!(assemble_pressure_stab(&m, &dofs, 0.0, 0.035).max_abs(), 0.0);
        let s = assemble_pressure_stab(&m, &dofs, 1e-2, 0.035);
        assert!(s.mul_vec(&vec![1.0; dofs.n_p()]).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn streamline_diffusion_properties() {
        let m = generate_channel::<f64>(1.0, 1.0, 4, 3).unwrap();
        let dofs = DofMap::new(&m);
        let zero = assemble_streamline_diffusion(&m, &dofs, &vec![0.0; dofs.n_u()], 1.0, 1e-3, 1.06);
        assert_eq!(zero.max_abs(), 0.0);
        let w: Vec<f64> = (0..dofs.n_u()).map(|i| (i as f64 * 0.71).cos()).collect();
        let s1 = assemble_streamline_diffusion(&m, &dofs, &w, 1.0, 1e-3, 1.06);
        let s2 = assemble_streamline_diffusion(&m, &dofs, &w, 2.0, 1e-3, 1.06);
        for (a, b) in s1.values().iter().zip(s2.values()) {
            assert_eq!(2.0 * a, *b);
        }
        for k in 0..100 {
            let v: Vec<f64> = (0..dofs.n_u()).map(|i| ((i * 31 + k * 17) as f64 * 0.173).sin()).collect();
            assert!(s1.quadratic_form(&v) >= -1e-14);
        }
    }

    #[test]
    fn inlet_penalty_consistency() {
        let m = generate_channel::<f64>(2.0, 1.0, 4, 4).unwrap();
        let dofs = DofMap::new(&m);
        let g: Vec<f64> = m.vertices().iter().flat_map(|p| [p[1] * (1.0 - p[1]), 0.0]).collect();
        let pen = assemble_inlet_penalty(&m, &dofs, INLET_TAG, 1e5, &g).unwrap();
        assert!(pen.rhs(0.0).iter().all(|&x| x == 0.0));
        let f = 0.6;
        let u: Vec<f64> = g.iter().map(|x| f * x).collect();
        let au = pen.matrix.mul_vec(&u);
        let rhs = pen.rhs(f);
        for v in m.vertices_with_tag(INLET_TAG) {
            for c in 0..2 {
                let i = dofs.vel(v, c);
                assert!((au[i] - rhs[i]).abs() < 1e-8 * 1e5);
            }
        }
        assert!(assemble_inlet_penalty(&m, &dofs, 42, 1e5, &g).is_err());
    }

    #[test]
    fn assembly_is_deterministic() {
        let m = generate_channel::<f64>(1.0, 1.0, 5, 5).unwrap();
        let dofs = DofMap::new(&m);
        let w: Vec<f64> = (0..dofs.n_u()).map(|i| (i as f64).sqrt()).collect();
        let a = assemble_convection(&m, &dofs, &w);
        let b = assemble_convection(&m, &dofs, &w);
        assert_eq!(a, b);
    }
}
