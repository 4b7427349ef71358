use proptest::prelude::*;

use ductflow::assembly::{assemble_mass, assemble_stiffness, DofMap, Field};
use ductflow::diagnostics::relative_l2;
use ductflow::dubc::{assemble_duct_inertia, assemble_duct_viscous, assemble_pressure_penalty, OutletKind, OutletSpec};
use ductflow::measure::{build_measurement_mesh, encode_velocity, ObservationOperator};
use ductflow::mesh::{
    generate_bifurcation, generate_box_channel, generate_channel, format_msh, outlet_tag, parse_msh, Mesh,
};
use ductflow::roukf::{simplex_sigma_points, ParameterMap};
use ductflow::timestepping::{BoundaryRoles, FlowSolver, InletWaveform, Scheme, SolverConfig};
use ductflow::vtk::{format_vtk, parse_vtk, truncate_components, PointField};

fn channel() -> impl Strategy<Value = (f64, f64, usize, usize)> {
    (0.5f64..5.0, 0.1f64..2.0, 1usize..12, 1usize..6)
}

fn outward_normals(mesh: &Mesh<f64>) -> bool {
    (0..mesh.num_boundary_facets()).all(|f| {
        let g = mesh.facet_geometry(f).unwrap();
        let fc = mesh.centroid_of(mesh.facet(f));
        let cc = mesh.cell_centroid(mesh.facet_cell(f));
        let d: f64 = (0..3).map(|i| g.normal[i] * (fc[i] - cc[i])).sum();
        let n: f64 = (0..3).map(|i| g.normal[i] * g.normal[i]).sum();
        d > 0.0 && (n.sqrt() - 1.0).abs() < 1e-12
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn channel_measure_and_normals((l, h, nx, ny) in channel()) {
        let mesh = generate_channel::<f64>(l, h, nx, ny).unwrap();
        prop_assert!((mesh.total_measure() - l * h).abs() <= 1e-10 * l * h);
        prop_assert!(outward_normals(&mesh));
        let tagged = (0..mesh.num_boundary_facets()).all(|f| mesh.facet_tag(f) > 0);
        prop_assert!(tagged);
    }

    #[test]
    fn box_measure_and_normals(l in 0.5f64..3.0, h in 0.2f64..1.0, d in 0.2f64..1.0, n in (1usize..5, 1usize..3, 1usize..3)) {
        let mesh = generate_box_channel::<f64>(l, h, d, [n.0, n.1, n.2]).unwrap();
        prop_assert!((mesh.total_measure() - l * h * d).abs() <= 1e-10 * l * h * d);
        prop_assert!(outward_normals(&mesh));
    }

    #[test]
    fn bifurcation_normals_point_outwards(res in 1usize..4, branch in 1.0f64..3.0) {
        let mesh = generate_bifurcation::<f64>(2.0, branch, 1.0, res).unwrap();
        prop_assert!(outward_normals(&mesh));
        prop_assert_eq!(mesh.tags(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn msh_round_trip((l, h, nx, ny) in channel()) {
        let mesh = generate_channel::<f64>(l, h, nx, ny).unwrap();
        let back: Mesh<f64> = parse_msh(&format_msh(&mesh)).unwrap();
        prop_assert_eq!(back.vertices(), mesh.vertices());
        prop_assert_eq!(back.cells_flat(), mesh.cells_flat());
        let tags = |m: &Mesh<f64>| {
            let mut t: Vec<(Vec<usize>, i32)> = (0..m.num_boundary_facets())
                .map(|f| {
                    let mut v = m.facet(f).to_vec();
                    v.sort_unstable();
                    (v, m.facet_tag(f))
                })
                .collect();
            t.sort();
            t
        };
        prop_assert_eq!(tags(&back), tags(&mesh));
    }

    #[test]
    fn vtk_round_trip((l, h, nx, ny) in channel(), seed in 0u32..1000) {
        let mesh = generate_channel::<f64>(l, h, nx, ny).unwrap();
        let n = mesh.num_vertices();
        let u: Vec<f64> = (0..2 * n).map(|i| ((i as u32 + seed) as f64 * 0.61).sin() * 1e3).collect();
        let snap = parse_vtk(&format_vtk(&mesh, Some(0.3), &[PointField::new("velocity", 2, &u)]).unwrap()).unwrap();
        prop_assert_eq!(truncate_components(snap.field("velocity").unwrap(), 2), u);
    }

    #[test]
    fn forms_are_linear_symmetric_and_definite((l, h, nx, ny) in channel(), c in 0.01f64..100.0, seed in 0u32..1000) {
        let mesh = generate_channel::<f64>(l, h, nx, ny).unwrap();
        let dofs = DofMap::new(&mesh);
        let mass = assemble_mass(&mesh, &dofs, Field::Scalar);
        let k1 = assemble_stiffness(&mesh, &dofs, Field::Scalar, 1.0);
        let kc = assemble_stiffness(&mesh, &dofs, Field::Scalar, c);
        let scaled = k1.scaled(c);
        for (a, b) in kc.values().iter().zip(scaled.values()) {
            prop_assert!((a - b).abs() <= 1e-14 * c * k1.max_abs());
        }
        prop_assert!(mass.is_symmetric() && k1.is_symmetric());
        let x: Vec<f64> = (0..dofs.n_p()).map(|i| ((i as u32 * 7 + seed) as f64).cos()).collect();
        prop_assert!(mass.quadratic_form(&x) > 0.0);
        prop_assert!(k1.quadratic_form(&x) >= -1e-12);
        let ones = vec![1.0; dofs.n_p()];
        let kernel = k1.mul_vec(&ones).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(kernel < 1e-12 * k1.max_abs());
    }

    #[test]
    fn duct_operators_scale_with_length(len in 0.05f64..20.0) {
        let mesh = generate_bifurcation::<f64>(2.0, 2.0, 1.0, 2).unwrap();
        let dofs = DofMap::new(&mesh);
        let unit = OutletSpec::new(&mesh, outlet_tag(1), OutletKind::Duct { length_cm: 1.0 }, 1e-8).unwrap();
        let duct = [unit.with_length(len)];
        let unit = [unit];
        let pairs = [
            (assemble_duct_inertia(&mesh, &dofs, &duct, 1.06), assemble_duct_inertia(&mesh, &dofs, &unit, 1.06).scaled(len)),
            (assemble_duct_viscous(&mesh, &dofs, &duct, 0.035), assemble_duct_viscous(&mesh, &dofs, &unit, 0.035).scaled(len)),
            (assemble_pressure_penalty(&mesh, &dofs, &duct), assemble_pressure_penalty(&mesh, &dofs, &unit).scaled(1.0 / len)),
        ];
        for (a, b) in &pairs {
            let tol = 1e-15 * b.max_abs();
            prop_assert!(a.values().iter().zip(b.values()).all(|(x, y)| (x - y).abs() <= tol));
        }
    }

    #[test]
    fn relative_error_is_scale_invariant(u in prop::collection::vec(-10.0f64..10.0, 6..40), shift in 0.1f64..1.0, c in -5.0f64..5.0, k in -8i32..8) {
        prop_assume!(c.abs() > 1e-3);
        let r: Vec<f64> = u.iter().map(|x| x + shift).collect();
        let e = relative_l2(&u, &r).unwrap();
        let p = 2f64.powi(k);
        let pu: Vec<f64> = u.iter().map(|x| p * x).collect();
        let pr: Vec<f64> = r.iter().map(|x| p * x).collect();
        prop_assert_eq!(relative_l2(&pu, &pr).unwrap(), e);
        let cu: Vec<f64> = u.iter().map(|x| c * x).collect();
        let cr: Vec<f64> = r.iter().map(|x| c * x).collect();
        prop_assert!((relative_l2(&cu, &cr).unwrap() - e).abs() <= 1e-12 * e.max(1e-300));
        prop_assert!(e >= 0.0);
    }

    #[test]
    fn lengths_stay_positive(beta in prop::collection::vec(-1e4f64..1e4, 1..5), base in 0.01f64..10.0) {
        let p = beta.len();
        let map = ParameterMap::new(vec![1.0; p + 1], (0..p).collect(), vec![base; p]).unwrap();
        prop_assert!(map.lengths(&beta).iter().all(|l| *l > 0.0 && l.is_finite()));
    }

    #[test]
    fn length_map_inverts(beta in prop::collection::vec(-6.0f64..6.0, 1..5)) {
        let p = beta.len();
        let map = ParameterMap::new(vec![2.0; p], (0..p).collect(), vec![2.8; p]).unwrap();
        let back = map.beta_of(&map.estimated_lengths(&beta));
        prop_assert!(back.iter().zip(&beta).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn sigma_points_have_zero_mean_and_unit_covariance(p in 1usize..24) {
        let xi = simplex_sigma_points(p).unwrap();
        prop_assert_eq!(xi.len(), p + 1);
        let w = 1.0 / (p + 1) as f64;
        for a in 0..p {
            let mean: f64 = xi.iter().map(|x| w * x[a]).sum();
            prop_assert!(mean.abs() < 1e-12);
            for b in 0..p {
                let cov: f64 = xi.iter().map(|x| w * x[a] * x[b]).sum();
                let expected = if a == b { 1.0 } else { 0.0 };
                prop_assert!((cov - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_encoding_inverts(values in prop::collection::vec(-0.999f64..0.999, 1..200), venc in 0.1f64..500.0) {
        let u: Vec<f64> = values.iter().map(|v| v * venc).collect();
        let back = encode_velocity(&u, venc, f64::INFINITY, 0).unwrap();
        for (a, b) in back.iter().zip(&u) {
            prop_assert!((a - b).abs() <= 1e-12 * venc);
        }
    }

    #[test]
    fn noisy_encoding_is_bounded_and_seeded(values in prop::collection::vec(-1.0f64..1.0, 1..200), venc in 0.1f64..50.0, snr in 0.0f64..40.0, seed in any::<u64>()) {
        let u: Vec<f64> = values.iter().map(|v| v * venc).collect();
        let a = encode_velocity(&u, venc, snr, seed).unwrap();
        prop_assert!(a.iter().all(|x| x.abs() <= venc));
        prop_assert_eq!(a, encode_velocity(&u, venc, snr, seed).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn interpolation_weights_partition_unity(res in 1usize..4, voxel in 0.05f64..0.3) {
        let mesh = generate_bifurcation::<f64>(2.0, 2.0, 1.0, res).unwrap();
        let meas = build_measurement_mesh(&mesh, voxel).unwrap();
        let h = ObservationOperator::new(&mesh, &meas).unwrap();
        let m = h.matrix();
        for i in 0..m.nrows() {
            let s: f64 = m.row(i).1.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12, "row {} sums to {}", i, s);
        }
    }
}

#[test]
fn fractional_divergence_does_not_grow_when_the_step_halves() {
    let mesh = std::sync::Arc::new(generate_bifurcation::<f64>(2.0, 2.0, 1.0, 3).unwrap());
    let wave = InletWaveform::Cosine { period: 0.9, amplitude: 1.0 };
    let mean_div = |tau: f64| {
        let outlets = [(1, 1.0), (2, 3.0)]
            .map(|(k, l)| OutletSpec::new(&mesh, outlet_tag(k), OutletKind::Duct { length_cm: l }, 1e-8).unwrap());
        let config = SolverConfig { tau, t_end: 0.3, scheme: Scheme::Fractional, snapshot_every: 0, ..Default::default() };
        let out = FlowSolver::new(mesh.clone(), BoundaryRoles::default(), outlets.to_vec(), config)
            .unwrap()
            .run(&wave, None)
            .unwrap();
        out.log.records.iter().map(|r| r.divnorm).sum::<f64>() / out.log.len() as f64
    };
    let divs: Vec<f64> = [1e-2, 5e-3, 2.5e-3].map(mean_div).to_vec();
    assert!(divs.windows(2).all(|w| w[1] <= w[0]), "{divs:?}");
}
