use std::f64::consts::PI;

use plap_core::geometry::{boundary_geometry, build_mesh, domain_measures, DomainSpec, TriMesh};
use plap_core::oracles::ellipse_boundary_integrals;
use plap_core::ConformalMetric;
use proptest::prelude::*;

fn polygon_perimeter(mesh: &TriMesh) -> f64 {
    mesh.boundary_loops()
        .iter()
        .map(|ids| (0..ids.len()).map(|k| (mesh.vertices()[ids[(k + 1) % ids.len()]] - mesh.vertices()[ids[k]]).norm()).sum::<f64>())
        .sum()
}

fn errors(spec: &DomainSpec, h: f64, area: f64, perimeter: f64) -> (f64, f64) {
    let mesh = build_mesh(spec, h).unwrap();
    let m = domain_measures(&mesh, &ConformalMetric::flat()).unwrap();
    ((m.volume - area).abs(), (polygon_perimeter(&mesh) - perimeter).abs())
}

#[test]
fn halving_h_cuts_measure_errors_by_three() {
    let ell = ellipse_boundary_integrals(2.0, 1.0).unwrap();
    let cases = [
        (DomainSpec::disk(1.0), PI, 2.0 * PI),
        (DomainSpec::ellipse(2.0, 1.0), ell.area, ell.perimeter),
        (DomainSpec::Annulus { inner: 0.5, outer: 1.0 }, 0.75 * PI, 3.0 * PI),
    ];
    for (spec, area, perimeter) in cases {
        let (a1, p1) = errors(&spec, 0.1, area, perimeter);
        let (a2, p2) = errors(&spec, 0.05, area, perimeter);
        assert!(a1 / a2 >= 3.0, "{spec:?}: area errors {a1:e} -> {a2:e}");
        assert!(p1 / p2 >= 3.0, "{spec:?}: perimeter errors {p1:e} -> {p2:e}");
    }
}

#[test]
fn parametric_boundary_weights_reproduce_the_perimeter() {
    let ell = ellipse_boundary_integrals(2.0, 1.0).unwrap();
    for h in [0.1, 0.05] {
        let m = domain_measures(&build_mesh(&DomainSpec::ellipse(2.0, 1.0), h).unwrap(), &ConformalMetric::flat()).unwrap();
        assert!((m.perimeter - ell.perimeter).abs() < 1e-8 * ell.perimeter);
    }
}

#[test]
fn disk_normals_are_exactly_radial() {
    for radius in [0.5, 1.0, 3.0] {
        let spec = DomainSpec::disk(radius);
        let mesh = build_mesh(&spec, 0.1 * radius).unwrap();
        let bg = boundary_geometry(&spec, &mesh).unwrap();
        for n in &bg.nodes {
            assert!((n.normal - n.position / n.position.norm()).norm() <= 1e-12);
            assert!((n.curvature - 1.0 / radius).abs() <= 1e-12);
        }
    }
}

fn convex_specs() -> impl Strategy<Value = DomainSpec> {
    prop_oneof![
        (0.3f64..3.0).prop_map(DomainSpec::disk),
        (1.0f64..3.0, 0.3f64..1.0).prop_map(|(a, f)| DomainSpec::ellipse(a, a * f)),
        (0.0f64..0.08, 0.0f64..0.05, 0.0f64..0.03).prop_map(|(c2, c3, s2)| DomainSpec::PolarStar {
            r0: 1.0,
            cos: vec![0.0, c2, c3],
            sin: vec![0.0, s2],
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn convex_domains_have_positive_curvature(spec in convex_specs()) {
        prop_assume!(spec.is_convex());
        let h = 0.15 * spec.diameter() / 2.0;
        let mesh = build_mesh(&spec, h).unwrap();
        let bg = boundary_geometry(&spec, &mesh).unwrap();
        prop_assert!(bg.min_curvature() > 0.0);
        for n in &bg.nodes {
            prop_assert!((n.normal.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn meshes_cover_the_domain(spec in convex_specs()) {
        let h = 0.15 * spec.diameter() / 2.0;
        let mesh = build_mesh(&spec, h).unwrap();
        let area: f64 = (0..mesh.n_triangles()).map(|e| mesh.area(e)).sum();
        let quad: f64 = mesh.quadrature().iter().map(|q| q.weight).sum();
        prop_assert!((area - quad).abs() < 1e-12 * area);
        prop_assert!((0..mesh.n_triangles()).all(|e| mesh.area(e) > 0.0));
        for (v, x) in mesh.vertices().iter().enumerate() {
            if !mesh.is_boundary(v) {
                prop_assert!(spec.contains(x));
            }
        }
    }
}
