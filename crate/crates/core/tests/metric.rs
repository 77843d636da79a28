use plap_core::geometry::{boundary_geometry, build_mesh, domain_measures, DomainSpec, Vec2};
use plap_core::identities::{identity_report, Tolerances};
use plap_core::solver::{solve, SolveConfig};
use plap_core::ConformalMetric;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn zero_polynomial_reproduces_the_flat_pipeline() {
    let spec = DomainSpec::ellipse(2.0, 1.0);
    let mesh = build_mesh(&spec, 0.08).unwrap();
    let bg = boundary_geometry(&spec, &mesh).unwrap();
    let flat = ConformalMetric::flat();
    let zero = ConformalMetric::poly(vec![0.0]).unwrap().declare_nonnegative_ricci(&mesh).unwrap();
    for p in [1.5, 3.0] {
        let a = solve(&mesh, &flat, &SolveConfig::with_p(p)).unwrap();
        let b = solve(&mesh, &zero, &SolveConfig::with_p(p)).unwrap();
        for (x, y) in a.u.values().iter().zip(b.u.values()) {
            assert!(close(*x, *y, 1e-12));
        }
        let (ra, _, _) = identity_report(&a, &mesh, &bg, &flat, &Tolerances::default()).unwrap();
        let (rb, _, _) = identity_report(&b, &mesh, &bg, &zero, &Tolerances::default()).unwrap();
        let mut shared = 0;
        for (key, va) in &ra.values {
            if let Some(vb) = rb.values.get(key) {
                assert!(close(*va, *vb, 1e-12), "p={p} {key}: {va} vs {vb}");
                shared += 1;
            }
        }
        assert!(shared >= 10, "only {shared} shared keys");
        assert!(close(ra.volume, rb.volume, 1e-12) && close(ra.perimeter, rb.perimeter, 1e-12));
    }
}

#[test]
fn constant_exponent_scales_lengths_and_areas() {
    let spec = DomainSpec::ellipse(1.5, 1.0);
    let mesh = build_mesh(&spec, 0.1).unwrap();
    let flat = domain_measures(&mesh, &ConformalMetric::flat()).unwrap();
    for c in [-0.7, 0.3, 1.2] {
        let m = domain_measures(&mesh, &ConformalMetric::constant(c)).unwrap();
        assert!(close(m.perimeter, c.exp() * flat.perimeter, 1e-13));
        assert!(close(m.volume, (2.0 * c).exp() * flat.volume, 1e-13));
        let metric = ConformalMetric::constant(c);
        assert_eq!(metric.gaussian_curvature(&Vec2::new(0.3, 0.2)), 0.0);
    }
}

#[test]
fn spherical_caps_have_nonnegative_curvature() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for s in [0.5, 2.0, 10.0] {
        let metric = ConformalMetric::spherical_cap(s);
        for _ in 0..10_000 {
            let x = Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let k = metric.gaussian_curvature(&x);
            assert!(k >= -1e-12, "s={s} K({x:?}) = {k}");
            assert!(close(k, (-2.0 * metric.phi(&x)).exp() / s, 1e-12));
        }
    }
}

#[test]
fn certification_rejects_negative_curvature() {
    let mesh = build_mesh(&DomainSpec::disk(1.0), 0.15).unwrap();
    assert!(ConformalMetric::bump(0.5, 0.4, Vec2::zeros()).unwrap().declare_nonnegative_ricci(&mesh).is_err());
    assert!(ConformalMetric::poly(vec![0.0, 0.0, 0.0, 0.2, 0.0, 0.1]).unwrap().declare_nonnegative_ricci(&mesh).is_err());
    assert!(ConformalMetric::poly(vec![0.0, 0.3, -0.1, -0.2]).unwrap().declare_nonnegative_ricci(&mesh).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn curvature_matches_a_finite_difference_of_the_exponent(
        a in -0.5f64..0.5, b in -0.5f64..0.5, c in -0.3f64..0.3, d in -0.3f64..0.3,
        x in -1.0f64..1.0, y in -1.0f64..1.0,
    ) {
        let metric = ConformalMetric::poly(vec![0.1, a, b, c, d, -c, 0.05 * a]).unwrap();
        let x = Vec2::new(x, y);
        let step = 1e-4;
        let lap = [Vec2::x(), Vec2::y(), -Vec2::x(), -Vec2::y()]
            .iter()
            .map(|e| metric.phi(&(x + e * step)) - metric.phi(&x))
            .sum::<f64>()
            / (step * step);
        let k = -(-2.0 * metric.phi(&x)).exp() * lap;
        prop_assert!((metric.gaussian_curvature(&x) - k).abs() < 1e-5);
        let v = Vec2::new(0.3, -0.8);
        let g = metric.area_factor(&x) * v.norm_squared();
        prop_assert!(close(metric.ricci_quadratic(&x, &v), metric.gaussian_curvature(&x) * g, 1e-12));
    }
}
