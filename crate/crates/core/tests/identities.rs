use plap_core::geometry::{boundary_geometry, build_mesh, domain_measures, BoundaryGeometry, DomainSpec, Vec2};
use plap_core::fields::recover_derivatives;
use plap_core::identities::{
    boundary_trace, fundamental_identity, hk_report, serrin_deficit, BoundaryTrace, Check, TraceNode,
};
use plap_core::solver::{solve, SolveConfig};
use plap_core::{ConformalMetric, DerivativeBundle, ScalarField};
use proptest::prelude::*;

/// Trace built from exact geometry and prescribed normal derivatives.
fn geometric_trace(bg: &BoundaryGeometry, metric: &ConformalMetric, p: f64, u_nu: impl Fn(usize) -> f64) -> BoundaryTrace {
    let kappa = metric.geodesic_boundary_curvature(bg);
    let nodes = bg
        .nodes
        .iter()
        .enumerate()
        .map(|(k, n)| TraceNode {
            vertex: n.vertex,
            loop_id: n.loop_id,
            s: n.arc,
            x: n.position.x,
            y: n.position.y,
            curvature: kappa[k],
            weight: n.weight * metric.length_factor(&n.position),
            u_nu: u_nu(k),
            u_nunu: 0.0,
            eq64_residual: 0.0,
            flagged: false,
        })
        .collect();
    BoundaryTrace { p, nodes }
}

fn solved(spec: &DomainSpec, metric: &ConformalMetric, h: f64, p: f64) -> (DerivativeBundle, BoundaryTrace, f64) {
    let mesh = build_mesh(spec, h).unwrap();
    let bg = boundary_geometry(spec, &mesh).unwrap();
    let sol = solve(&mesh, metric, &SolveConfig::with_p(p)).unwrap();
    let (bundle, trace) = boundary_trace(&sol, &mesh, &bg, metric).unwrap();
    (bundle, trace, domain_measures(&mesh, metric).unwrap().volume)
}

#[test]
fn fundamental_identity_residual_shrinks_on_the_ball() {
    let spec = DomainSpec::disk(1.0);
    let flat = ConformalMetric::flat();
    for p in [2.0, 3.0] {
        let residual = |h: f64| {
            let mesh = build_mesh(&spec, h).unwrap();
            let (bundle, trace, _) = solved(&spec, &flat, h, p);
            let measures = domain_measures(&mesh, &flat).unwrap();
            let fi = fundamental_identity(&bundle, &trace, &measures, 1.0);
            fi.volume_vs_rhs.residual.max(fi.boundary_vs_rhs.residual)
        };
        let (coarse, fine) = (residual(0.1), residual(0.05));
        assert!(fine <= 0.6 * coarse || fine < 1e-4, "p={p}: {coarse:e} -> {fine:e}");
    }
}

#[test]
fn serrin_terms_vanish_on_the_ball() {
    let spec = DomainSpec::disk(1.0);
    for p in [1.5, 2.0, 3.0] {
        let (_, trace, volume) = solved(&spec, &ConformalMetric::flat(), 0.05, p);
        let d = serrin_deficit(&trace).unwrap();
        assert!(d.deficit <= 0.02 * volume * 2.0, "p={p}: {}", d.deficit);
        assert!(d.max_nodewise <= 0.03, "p={p}: {}", d.max_nodewise);
    }
}

fn convex_specs() -> impl Strategy<Value = DomainSpec> {
    prop_oneof![
        (0.5f64..2.0).prop_map(DomainSpec::disk),
        (1.0f64..2.5, 0.4f64..1.0).prop_map(|(a, f)| DomainSpec::ellipse(a, a * f)),
        (0.0f64..0.08, 0.0f64..0.05).prop_map(|(c2, s3)| DomainSpec::PolarStar {
            r0: 1.0,
            cos: vec![0.0, c2],
            sin: vec![0.0, 0.0, s3],
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn deficit_and_t2_are_nonnegative_on_any_trace(
        spec in convex_specs(),
        p in 1.2f64..5.0,
        amp in 0.0f64..2.0,
        freq in 1usize..6,
    ) {
        let mesh = build_mesh(&spec, 0.2 * spec.diameter() / 2.0).unwrap();
        let bg = boundary_geometry(&spec, &mesh).unwrap();
        let flat = ConformalMetric::flat();
        let count = bg.nodes.len() as f64;
        let trace = geometric_trace(&bg, &flat, p, |k| {
            -0.5 * (1.0 + amp * (freq as f64 * std::f64::consts::TAU * k as f64 / count).sin()).abs() - 1e-3
        });
        let d = serrin_deficit(&trace).unwrap();
        prop_assert!(d.deficit >= 0.0);
        let measures = domain_measures(&mesh, &flat).unwrap();
        // T₂ is a boundary quantity; any bundle on this mesh will do.
        let b = recover_derivatives(&ScalarField::zeros(&mesh), &mesh).unwrap();
        let hk = hk_report(&b, &trace, &measures, 1.0, 1e-3).unwrap();
        prop_assert!(hk.t2 >= 0.0);
        prop_assert!((hk.t2 - d.deficit).abs() <= 1e-12 * d.deficit.max(1.0));
    }

    #[test]
    fn heintze_karcher_inequality_on_convex_domains(spec in convex_specs(), s in 1.0f64..10.0) {
        let mesh = build_mesh(&spec, 0.05 * spec.diameter() / 2.0).unwrap();
        let bg = boundary_geometry(&spec, &mesh).unwrap();
        for metric in [ConformalMetric::flat(), ConformalMetric::spherical_cap(s)] {
            let trace = geometric_trace(&bg, &metric, 2.0, |_| -0.5);
            prop_assume!(trace.nodes.iter().all(|n| n.curvature > 0.0));
            let volume = domain_measures(&mesh, &metric).unwrap().volume;
            let t3 = trace.nodes.iter().map(|n| n.weight / n.curvature).sum::<f64>() - 2.0 * volume;
            prop_assert!(t3 >= -1e-3 * 2.0 * volume, "{spec:?} T3 = {t3}");
        }
    }
}

#[test]
fn check_residuals_are_symmetric_and_floored() {
    let a = Check::new("a", 1.0, 1.02, 0.0, 0.03);
    let b = Check::new("b", 1.02, 1.0, 0.0, 0.03);
    assert_eq!(a.relative_residual, b.relative_residual);
    assert!(a.pass);
    let tiny = Check::new("tiny", 1e-9, 2e-9, 1.0, 1e-6);
    assert!(tiny.pass && tiny.relative_residual <= 1e-9);
    assert!(!Check::new("far", 1.0, 2.0, 0.0, 0.1).pass);
}

#[test]
fn curvature_of_a_spherical_cap_disk_is_geodesic() {
    let spec = DomainSpec::disk(1.0);
    let mesh = build_mesh(&spec, 0.1).unwrap();
    let bg = boundary_geometry(&spec, &mesh).unwrap();
    let s = 2.0;
    let metric = ConformalMetric::spherical_cap(s);
    // φ = -r²/(4s): κ_g = e^{-φ}(1 + ∂_rφ) = e^{1/(4s)}(1 - 1/(2s)) on the unit circle.
    let expected = (0.25 / s).exp() * (1.0 - 0.5 / s);
    for k in metric.geodesic_boundary_curvature(&bg) {
        assert!((k - expected).abs() < 1e-12);
    }
    assert!(metric.gaussian_curvature(&Vec2::zeros()) > 0.0);
}
