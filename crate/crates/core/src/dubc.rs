//! Duct boundary terms: surface inertia and tangential viscosity of a virtual straight duct
//! attached to each outlet, backflow stabilization, tangential velocity penalty, and the
//! pressure penalty used by the projection step.

use serde::{Deserialize, Serialize};

use crate::assembly::forms::{facet_tensor_mass, normal_projector, p1_mass, tangential_projector};
use crate::assembly::{DofMap, Field};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{facet_surface_gradients, Mesh};
use crate::scalar::vec3::{self, Vec3};
use crate::scalar::Real;

/// Pressure penalty coefficient that grounds free-traction outlets in the projection step.
pub const FREE_OUTLET_PRESSURE_PENALTY: f64 = 1e8;

/// Default tolerance on the deviation of facet normals from an outlet's shared normal.
pub const DEFAULT_PLANARITY_TOL: f64 = 1e-8;

/// `max(−x, 0)`.
#[inline]
pub fn negative_part<T: Real>(x: T) -> T {
    (-x).max(T::zero())
}

/// Boundary condition on one outlet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutletKind {
    /// Virtual duct of the given length in cm.
    Duct { length_cm: f64 },
    /// Traction-free (do-nothing) outlet.
    Free,
}

/// One planar outlet and its boundary condition.
#[derive(Clone, Debug, PartialEq)]
pub struct OutletSpec<T> {
    pub tag: i32,
    pub kind: OutletKind,
    pub facets: Vec<usize>,
    pub normal: Vec3<T>,
    pub measure: T,
}

impl<T: Real> OutletSpec<T> {
    /// Collects the facets tagged `tag` and checks that they are coplanar within `planarity_tol`.
    pub fn new(mesh: &Mesh<T>, tag: i32, kind: OutletKind, planarity_tol: f64) -> Result<Self> {
        if let OutletKind::Duct { length_cm } = kind {
            if !(length_cm > 0.0) || !length_cm.is_finite() {
                return Err(Error::InvalidInput(format!("duct length on outlet {tag} must be positive, got {length_cm}")));
            }
        }
        let facets = mesh.facets_with_tag(tag);
        if facets.is_empty() {
            return Err(Error::UnknownTag(tag));
        }
        let mut acc = vec3::zero();
        let mut measure = T::zero();
        let mut geos = Vec::with_capacity(facets.len());
        for &f in &facets {
            let g = mesh.facet_geometry(f)?;
            acc = vec3::add(&acc, &vec3::scale(&g.normal, g.measure));
            measure += g.measure;
            geos.push(g);
        }
        let normal = vec3::normalize(&acc);
        let tol = T::lit(planarity_tol);
        let origin = *mesh.vertex(mesh.facet(facets[0])[0]);
        let (lo, hi) = mesh.bounding_box();
        let extent = vec3::norm(&vec3::sub(&hi, &lo));
        for (&f, g) in facets.iter().zip(&geos) {
            let dev = vec3::norm(&vec3::sub(&g.normal, &normal));
            let off = mesh
                .facet(f)
                .iter()
                .map(|&v| vec3::dot(&vec3::sub(mesh.vertex(v), &origin), &normal).abs())
                .fold(T::zero(), |a, b| a.max(b));
            if dev > tol || off > tol * extent {
                return Err(Error::InvalidMesh(format!(
                    "outlet {tag} is not planar: facet {f} normal deviates by {:e}",
                    dev.to_f64_lossy()
                )));
            }
        }
        Ok(Self { tag, kind, facets, normal, measure })
    }

    /// Duct length, or `None` for a free outlet.
    pub fn length(&self) -> Option<T> {
        match self.kind {
            OutletKind::Duct { length_cm } => Some(T::lit(length_cm)),
            OutletKind::Free => None,
        }
    }

    pub fn is_duct(&self) -> bool {
        matches!(self.kind, OutletKind::Duct { .. })
    }

    /// Same outlet with a different duct length.
    pub fn with_length(&self, length_cm: f64) -> Self {
        Self { kind: OutletKind::Duct { length_cm }, ..self.clone() }
    }
}

/// Checks that outlet tags are distinct and their facet sets disjoint.
pub fn validate_outlets<T: Real>(outlets: &[OutletSpec<T>]) -> Result<()> {
    for (i, a) in outlets.iter().enumerate() {
        for b in &outlets[i + 1..] {
            if a.tag == b.tag || a.facets.iter().any(|f| b.facets.contains(f)) {
                return Err(Error::InvalidInput(format!("outlets {} and {} overlap", a.tag, b.tag)));
            }
        }
    }
    Ok(())
}

/// Coefficients of the outlet terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCoefficients {
    pub gamma_tan: f64,
    pub gamma_press: f64,
    pub backflow: bool,
}

impl Default for BoundaryCoefficients {
    fn default() -> Self {
        Self { gamma_tan: 1e8, gamma_press: 0.0, backflow: true }
    }
}

fn ducts<T: Real>(outlets: &[OutletSpec<T>]) -> impl Iterator<Item = (&OutletSpec<T>, T)> {
    outlets.iter().filter_map(|o| o.length().map(|l| (o, l)))
}

/// `Σ_m ℓ_m ρ ∫_Γm u_n v_n` over duct outlets.
pub fn assemble_duct_inertia<T: Real>(mesh: &Mesh<T>, dofs: &DofMap, outlets: &[OutletSpec<T>], rho: T) -> CsrMatrix<T> {
    let mut out = dofs.pattern(mesh, Field::Vector);
    for (o, l) in ducts(outlets) {
        facet_tensor_mass(mesh, dofs, &o.facets, Some(o.normal), |n| normal_projector(n, l * rho), &mut out);
    }
    out
}

/// `Σ_m ℓ_m μ ∫_Γm ∇_t u_n · ∇_t v_n` over duct outlets.
pub fn assemble_duct_viscous<T: Real>(mesh: &Mesh<T>, dofs: &DofMap, outlets: &[OutletSpec<T>], mu: T) -> CsrMatrix<T> {
    let mut out = dofs.pattern(mesh, Field::Vector);
    let d = mesh.dim();
    for (o, l) in ducts(outlets) {
        let n = o.normal;
        for &f in &o.facets {
            let fv = mesh.facet(f);
            let measure = mesh.facet_geometry(f).map(|g| g.measure).unwrap_or(T::zero());
            let grads = facet_surface_gradients(&mesh.points_of(fv));
            for a in 0..d {
                for b in 0..d {
                    let s = l * mu * measure * vec3::dot(&grads[a], &grads[b]);
                    for c in 0..d {
                        for e in 0..d {
                            out.add_at(dofs.vel(fv[a], c), dofs.vel(fv[b], e), s * n[c] * n[e]);
                        }
                    }
                }
            }
        }
    }
    out
}

/// `Σ_m γ_tan ∫_Γm (u − u_n n)·(v − v_n n)` over duct outlets.
pub fn assemble_tangential_penalty<T: Real>(
    mesh: &Mesh<T>,
    dofs: &DofMap,
    outlets: &[OutletSpec<T>],
    gamma_tan: T,
) -> CsrMatrix<T> {
    let mut out = dofs.pattern(mesh, Field::Vector);
    for (o, _) in ducts(outlets) {
        facet_tensor_mass(mesh, dofs, &o.facets, Some(o.normal), |n| tangential_projector(n, gamma_tan), &mut out);
    }
    out
}

/// `Σ_m (ρ/2) ∫_Γm |w·n|₋ u·v` over duct outlets.
pub fn assemble_backflow<T: Real>(
    mesh: &Mesh<T>,
    dofs: &DofMap,
    outlets: &[OutletSpec<T>],
    w: &[T],
    rho: T,
) -> CsrMatrix<T> {
    let mut out = dofs.pattern(mesh, Field::Vector);
    assemble_backflow_into(mesh, dofs, outlets, w, rho, &mut out);
    out
}

/// [`assemble_backflow`] into an existing velocity pattern (zeroed first).
pub fn assemble_backflow_into<T: Real>(
    mesh: &Mesh<T>,
    dofs: &DofMap,
    outlets: &[OutletSpec<T>],
    w: &[T],
    rho: T,
    out: &mut CsrMatrix<T>,
) {
    out.fill_zero();
    let d = mesh.dim();
    let half_rho = rho * T::lit(0.5);
    for (o, _) in ducts(outlets) {
        for &f in &o.facets {
            let fv = mesh.facet(f);
            let mut wn = [T::zero(); 3];
            for (a, &v) in fv.iter().enumerate() {
                for c in 0..d {
                    wn[a] += w[dofs.vel(v, c)] * o.normal[c];
                }
            }
            if wn[..d].iter().all(|&x| x >= T::zero()) {
                continue;
            }
            let measure = mesh.facet_geometry(f).map(|g| g.measure).unwrap_or(T::zero());
            let local = inflow_weighted_mass(&wn[..d], measure);
            for a in 0..d {
                for b in 0..d {
                    let v = half_rho * local[a][b];
                    for c in 0..d {
                        out.add_at(dofs.vel(fv[a], c), dofs.vel(fv[b], c), v);
                    }
                }
            }
        }
    }
}

/// Exact `∫_F |g|₋ λ_a λ_b` for the linear function `g` with vertex values `g_v` on a
/// segment or triangle of the given measure.
fn inflow_weighted_mass<T: Real>(g_v: &[T], measure: T) -> [[T; 3]; 3] {
    let n = g_v.len();
    let mut out = [[T::zero(); 3]; 3];
    // Sub-simplices of the region g ≤ 0, in barycentric coordinates of the facet.
    let mut pieces: Vec<Vec<[T; 3]>> = Vec::new();
    let vertex = |i: usize| {
        let mut b = [T::zero(); 3];
        b[i] = T::one();
        b
    };
    let lerp = |p: &[T; 3], q: &[T; 3], t: T| [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]), p[2] + t * (q[2] - p[2])];
    let eval = |b: &[T; 3]| (0..n).map(|i| b[i] * g_v[i]).sum::<T>();
    // Sutherland–Hodgman clip of the facet polygon against g ≤ 0.
    let poly: Vec<[T; 3]> = (0..n).map(vertex).collect();
    let mut clipped: Vec<[T; 3]> = Vec::new();
    let m = if n == 2 { 1 } else { n };
    if n == 2 {
        let (p, q) = (poly[0], poly[1]);
        let (gp, gq) = (eval(&p), eval(&q));
        let root = |gp: T, gq: T| gp / (gp - gq);
        match (gp <= T::zero(), gq <= T::zero()) {
            (true, true) => clipped = vec![p, q],
            (true, false) => clipped = vec![p, lerp(&p, &q, root(gp, gq))],
            (false, true) => clipped = vec![lerp(&p, &q, root(gp, gq)), q],
            (false, false) => {}
        }
        if clipped.len() == 2 {
            pieces.push(clipped);
        }
    } else {
        for k in 0..m {
            let (p, q) = (poly[k], poly[(k + 1) % m]);
            let (gp, gq) = (eval(&p), eval(&q));
            if gp <= T::zero() {
                clipped.push(p);
            }
            if (gp < T::zero() && gq > T::zero()) || (gp > T::zero() && gq < T::zero()) {
                clipped.push(lerp(&p, &q, gp / (gp - gq)));
            }
        }
        for k in 1..clipped.len().saturating_sub(1) {
            pieces.push(vec![clipped[0], clipped[k], clipped[k + 1]]);
        }
    }
    for piece in pieces {
        let (points, weights): (Vec<[T; 3]>, Vec<T>) = if n == 2 {
            let len = (piece[1][1] - piece[0][1]).abs();
            let off = T::lit(0.5 / 3f64.sqrt());
            let half = T::lit(0.5);
            (
                vec![lerp(&piece[0], &piece[1], half - off), lerp(&piece[0], &piece[1], half + off)],
                vec![half * len, half * len],
            )
        } else {
            // area ratio from the (λ1, λ2) coordinates
            let (a, b, c) = (piece[0], piece[1], piece[2]);
            let ratio = ((b[1] - a[1]) * (c[2] - a[2]) - (b[2] - a[2]) * (c[1] - a[1])).abs();
            let at = |l: [f64; 3]| {
                let mut p = [T::zero(); 3];
                for k in 0..3 {
                    p[k] = T::lit(l[0]) * a[k] + T::lit(l[1]) * b[k] + T::lit(l[2]) * c[k];
                }
                p
            };
            let third = 1.0 / 3.0;
            (
                vec![at([third, third, third]), at([0.6, 0.2, 0.2]), at([0.2, 0.6, 0.2]), at([0.2, 0.2, 0.6])],
                vec![
                    T::lit(-27.0 / 48.0) * ratio,
                    T::lit(25.0 / 48.0) * ratio,
                    T::lit(25.0 / 48.0) * ratio,
                    T::lit(25.0 / 48.0) * ratio,
                ],
            )
        };
        for (p, wq) in points.iter().zip(&weights) {
            let phi = negative_part(eval(p));
            for a in 0..n {
                for b in 0..n {
                    out[a][b] += *wq * measure * phi * p[a] * p[b];
                }
            }
        }
    }
    out
}

/// Projection-step pressure penalty: `(1/ℓ_m) ∫_Γm p q` on ducts and a large fixed
/// coefficient on free outlets.
pub fn assemble_pressure_penalty<T: Real>(mesh: &Mesh<T>, dofs: &DofMap, outlets: &[OutletSpec<T>]) -> CsrMatrix<T> {
    let mut out = dofs.pattern(mesh, Field::Scalar);
    let d = mesh.dim();
    for o in outlets {
        let coeff = match o.length() {
            Some(l) => T::one() / l,
            None => T::lit(FREE_OUTLET_PRESSURE_PENALTY),
        };
        for &f in &o.facets {
            let fv = mesh.facet(f);
            let measure = mesh.facet_geometry(f).map(|g| g.measure).unwrap_or(T::zero());
            for a in 0..d {
                for b in 0..d {
                    out.add_at(fv[a], fv[b], coeff * p1_mass(measure, d, a, b));
                }
            }
        }
    }
    out
}

/// `γ_press Σ_m ∫_Γm ∇_t p · ∇_t q` over duct outlets.
pub fn assemble_outlet_pressure_stiffness<T: Real>(
    mesh: &Mesh<T>,
    dofs: &DofMap,
    outlets: &[OutletSpec<T>],
    gamma_press: T,
) -> CsrMatrix<T> {
    let mut out = dofs.pattern(mesh, Field::Scalar);
    let d = mesh.dim();
    for (o, _) in ducts(outlets) {
        for &f in &o.facets {
            let fv = mesh.facet(f);
            let measure = mesh.facet_geometry(f).map(|g| g.measure).unwrap_or(T::zero());
            let grads = facet_surface_gradients(&mesh.points_of(fv));
            for a in 0..d {
                for b in 0..d {
                    out.add_at(fv[a], fv[b], gamma_press * measure * vec3::dot(&grads[a], &grads[b]));
                }
            }
        }
    }
    out
}

/// `∫_Γm u·n`.
pub fn outlet_flow_rate<T: Real>(u: &[T], mesh: &Mesh<T>, dofs: &DofMap, outlet: &OutletSpec<T>) -> T {
    let d = mesh.dim();
    let mut q = T::zero();
    for &f in &outlet.facets {
        let measure = mesh.facet_geometry(f).map(|g| g.measure).unwrap_or(T::zero());
        let share = measure / T::from_usize_lossy(d);
        for &v in mesh.facet(f) {
            for c in 0..d {
                q += share * u[dofs.vel(v, c)] * outlet.normal[c];
            }
        }
    }
    q
}

/// Flow rate through the facets tagged `tag` (per-facet outward normals).
pub fn tagged_flow_rate<T: Real>(u: &[T], mesh: &Mesh<T>, dofs: &DofMap, tag: i32) -> Result<T> {
    let facets = mesh.facets_with_tag(tag);
    if facets.is_empty() {
        return Err(Error::UnknownTag(tag));
    }
    let d = mesh.dim();
    let mut q = T::zero();
    for f in facets {
        let g = mesh.facet_geometry(f)?;
        let share = g.measure / T::from_usize_lossy(d);
        for &v in mesh.facet(f) {
            for c in 0..d {
                q += share * u[dofs.vel(v, c)] * g.normal[c];
            }
        }
    }
    Ok(q)
}

/// Mean of `p` over the outlet.
pub fn outlet_mean_pressure<T: Real>(p: &[T], mesh: &Mesh<T>, outlet: &OutletSpec<T>) -> T {
    let d = mesh.dim();
    let mut acc = T::zero();
    for &f in &outlet.facets {
        let measure = mesh.facet_geometry(f).map(|g| g.measure).unwrap_or(T::zero());
        let share = measure / T::from_usize_lossy(d);
        for &v in mesh.facet(f) {
            acc += share * p[v];
        }
    }
    acc / outlet.measure
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_bifurcation, generate_box_channel, generate_channel, outlet_tag};
    use approx::assert_relative_eq;

    fn unit_channel(ny: usize) -> (Mesh<f64>, DofMap) {
        let m = generate_channel::<f64>(1.0, 1.0, 3, ny).unwrap();
        let d = DofMap::new(&m);
        (m, d)
    }

    fn duct(m: &Mesh<f64>, l: f64) -> Vec<OutletSpec<f64>> {
        vec![OutletSpec::new(m, outlet_tag(1), OutletKind::Duct { length_cm: l }, 1e-8).unwrap()]
    }

    fn uniform(d: &DofMap, v: [f64; 2]) -> Vec<f64> {
        (0..d.n_p()).flat_map(|_| v).collect()
    }

    #[test]
    fn negative_part_values() {
        assert_eq!(negative_part(-3.0), 3.0);
        assert_eq!(negative_part(2.0), 0.0);
        assert_eq!(negative_part(0.0), 0.0);
    }

    #[test]
    fn duct_inertia_forms() {
        let (m, d) = unit_channel(4);
        let a = assemble_duct_inertia(&m, &d, &duct(&m, 2.0), 1.0);
        assert_relative_eq!(a.quadratic_form(&uniform(&d, [1.0, 0.0])), 2.0, max_relative = 1e-14);
        let tangential = uniform(&d, [0.0, 1.0]);
        assert!(a.mul_vec(&tangential).iter().all(|x| x.abs() < 1e-15));
        let free = vec![OutletSpec::new(&m, outlet_tag(1), OutletKind::Free, 1e-8).unwrap()];
        assert_eq!(assemble_duct_inertia(&m, &d, &free, 1.0).max_abs(), 0.0);
    }

    #[test]
    fn duct_viscous_forms() {
        let m = generate_channel::<f64>(1.0, 0.5, 2, 1).unwrap();
        let d = DofMap::new(&m);
        let a1 = assemble_duct_viscous(&m, &d, &duct(&m, 1.0), 1.0);
        let u: Vec<f64> = m.vertices().iter().flat_map(|p| [p[1] / 0.5, 0.0]).collect();
        assert_relative_eq!(a1.quadratic_form(&u), 2.0, max_relative = 1e-13);
        assert!(a1.quadratic_form(&uniform(&d, [1.0, 0.0])).abs() < 1e-14);
        let a2 = assemble_duct_viscous(&m, &d, &duct(&m, 2.0), 1.0);
        for (x, y) in a1.values().iter().zip(a2.values()) {
            assert_eq!(2.0 * x, *y);
        }
    }

    #[test]
    fn backflow_forms() {
        let (m, d) = unit_channel(4);
        let out = duct(&m, 1.0);
        let outflow = assemble_backflow(&m, &d, &out, &uniform(&d, [1.0, 0.3]), 1.0);
        assert_eq!(outflow.max_abs(), 0.0);
        let inflow = assemble_backflow(&m, &d, &out, &uniform(&d, [-2.0, 0.0]), 1.0);
        assert_relative_eq!(inflow.quadratic_form(&uniform(&d, [1.0, 0.0])), 1.0, max_relative = 1e-13);
        let w: Vec<f64> = (0..d.n_u()).map(|i| (i as f64 * 1.3).sin()).collect();
        let bf = assemble_backflow(&m, &d, &out, &w, 1.06);
        for k in 0..100 {
            let v: Vec<f64> = (0..d.n_u()).map(|i| ((i * 7 + k * 13) as f64 * 0.41).cos()).collect();
            assert!(bf.quadratic_form(&v) >= -1e-14);
        }
    }

    fn brute_segment(g: [f64; 2], a: usize, b: usize) -> f64 {
        let n = 200_000;
        (0..n)
            .map(|i| {
                let s = (i as f64 + 0.5) / n as f64;
                let l = [1.0 - s, s];
                negative_part(g[0] * l[0] + g[1] * l[1]) * l[a] * l[b] / n as f64
            })
            .sum()
    }

    #[test]
    fn inflow_weight_is_exact_on_segments() {
        for g in [[-1.0, 2.0], [0.5, -0.25], [-1.0, -3.0]] {
            let m = inflow_weighted_mass(&g, 1.0);
            for a in 0..2 {
                for b in 0..2 {
                    assert!((m[a][b] - brute_segment(g, a, b)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn inflow_weight_is_exact_on_triangles() {
        let g = [-1.0, 0.7, 0.2];
        let m = inflow_weighted_mass(&g, 0.5);
        let n = 1200;
        let mut brute = [[0.0; 3]; 3];
        let h = 1.0 / n as f64;
        for i in 0..n {
            for j in 0..n - i {
                // split each grid square into its two triangles, sample at centroids
                for (x, y, ok) in [(i as f64 + 1.0 / 3.0, j as f64 + 1.0 / 3.0, true), (i as f64 + 2.0 / 3.0, j as f64 + 2.0 / 3.0, i + j + 1 < n)] {
                    if !ok {
                        continue;
                    }
                    let l = [1.0 - (x + y) * h, x * h, y * h];
                    let phi = negative_part(g[0] * l[0] + g[1] * l[1] + g[2] * l[2]);
                    for a in 0..3 {
                        for b in 0..3 {
                            brute[a][b] += phi * l[a] * l[b] * h * h / 2.0;
                        }
                    }
                }
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                assert!((m[a][b] - brute[a][b]).abs() < 1e-6, "{a}{b}: {} vs {}", m[a][b], brute[a][b]);
            }
        }
    }

    #[test]
    fn tangential_penalty_forms() {
        let (m, d) = unit_channel(4);
        let a = assemble_tangential_penalty(&m, &d, &duct(&m, 1.0), 1e8);
        assert!(a.quadratic_form(&uniform(&d, [3.0, 0.0])).abs() < 1e-6);
        assert_relative_eq!(a.quadratic_form(&uniform(&d, [0.0, 1.0])), 1e8, max_relative = 1e-13);
        assert!(a.is_symmetric());
    }

    #[test]
    fn pressure_penalty_forms() {
        let (m, d) = unit_channel(4);
        let a = assemble_pressure_penalty(&m, &d, &duct(&m, 2.0));
        assert_relative_eq!(a.quadratic_form(&vec![3.0; d.n_p()]), 4.5, max_relative = 1e-13);
        let b = assemble_pressure_penalty(&m, &d, &duct(&m, 8.0));
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_relative_eq!(*x, 4.0 * y, max_relative = 1e-15);
        }
        let bif = generate_bifurcation::<f64>(2.0, 1.5, 1.0, 3).unwrap();
        let bd = DofMap::new(&bif);
        let outs: Vec<_> = (1..=2)
            .map(|k| OutletSpec::new(&bif, outlet_tag(k), OutletKind::Duct { length_cm: 1.5 }, 1e-8).unwrap())
            .collect();
        let pp = assemble_pressure_penalty(&bif, &bd, &outs);
        let sum = |tag| -> f64 { bif.vertices_with_tag(tag).iter().map(|&v| pp.get(v, v)).sum() };
        assert_relative_eq!(sum(outlet_tag(1)), sum(outlet_tag(2)), max_relative = 1e-10);
    }

    #[test]
    fn flow_rate_values() {
        let (m, d) = unit_channel(3);
        let o = &duct(&m, 1.0)[0];
        assert_relative_eq!(outlet_flow_rate(&uniform(&d, [1.0, 0.0]), &m, &d, o), 1.0, max_relative = 1e-14);
        assert_eq!(outlet_flow_rate(&uniform(&d, [0.0, 1.0]), &m, &d, o), 0.0);
        assert_eq!(outlet_flow_rate(&vec![0.0; d.n_u()], &m, &d, o), 0.0);
    }

    #[test]
    fn dubc_terms_only_touch_outlet_dofs() {
        let (m, d) = unit_channel(4);
        let outs = duct(&m, 1.0);
        let w: Vec<f64> = (0..d.n_u()).map(|i| -(i as f64 * 0.3).cos()).collect();
        let on: Vec<usize> = m.vertices_with_tag(outlet_tag(1));
        for a in [
            assemble_duct_inertia(&m, &d, &outs, 1.0),
            assemble_duct_viscous(&m, &d, &outs, 1.0),
            assemble_backflow(&m, &d, &outs, &w, 1.0),
            assemble_tangential_penalty(&m, &d, &outs, 1.0),
        ] {
            for i in 0..d.n_u() {
                let (cols, vals) = a.row(i);
                for (&c, &v) in cols.iter().zip(vals) {
                    if v != 0.0 {
                        assert!(on.contains(&(i / 2)) && on.contains(&(c / 2)));
                    }
                }
            }
        }
    }

    #[test]
    fn non_planar_outlet_is_rejected() {
        let base = generate_channel::<f64>(1.0, 1.0, 2, 2).unwrap();
        let cells: Vec<usize> = (0..base.num_cells()).flat_map(|c| base.cell(c).to_vec()).collect();
        let m = Mesh::with_classifier(2, base.vertices().to_vec(), cells, |_, mid| {
            if mid[0] > 0.999 || mid[1] > 0.999 {
                3
            } else {
                1
            }
        })
        .unwrap();
        assert!(matches!(OutletSpec::new(&m, 3, OutletKind::Free, 1e-8), Err(Error::InvalidMesh(_))));
        assert!(OutletSpec::new(&m, 3, OutletKind::Duct { length_cm: -1.0 }, 1e-8).is_err());
        assert!(matches!(OutletSpec::new(&m, 9, OutletKind::Free, 1e-8), Err(Error::UnknownTag(9))));
    }

    #[test]
    fn three_dimensional_outlet() {
        let m = generate_box_channel::<f64>(2.0, 1.0, 1.0, [2, 2, 2]).unwrap();
        let d = DofMap::new(&m);
        let o = duct(&m, 2.0);
        assert_relative_eq!(o[0].measure, 1.0, max_relative = 1e-14);
        let u: Vec<f64> = (0..d.n_p()).flat_map(|_| [1.0, 0.0, 0.0]).collect();
        let a = assemble_duct_inertia(&m, &d, &o, 1.0);
        assert_relative_eq!(a.quadratic_form(&u), 2.0, max_relative = 1e-13);
        let v = assemble_duct_viscous(&m, &d, &o, 1.0);
        // u_n = y on the unit outlet square: ℓ ∫ |∇_t u_n|² = 2
        let lin: Vec<f64> = m.vertices().iter().flat_map(|p| [p[1], 0.0, 0.0]).collect();
        assert_relative_eq!(v.quadratic_form(&lin), 2.0, max_relative = 1e-12);
    }
}
