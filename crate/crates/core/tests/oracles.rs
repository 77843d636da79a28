use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use plap_core::oracles::{
    ellipse_boundary_integrals, matrix_inequality, matrix_inequality_sweep, p_ball_constant, radial_exact,
    radial_fd_solve, SweepConfig,
};
use plap_core::par::Exec;
use proptest::prelude::*;

#[test]
fn closed_profiles_solve_the_radial_equation() {
    for n in 2..=6 {
        for p in [1.1, 1.3, 1.5, 2.0, 2.5, 3.0, 4.0, 6.0] {
            let prof = radial_exact(n, p, 1.7).unwrap();
            for k in 1..=1000 {
                let r = 1.7 * k as f64 / 1000.0;
                let res = prof.ode_residual(r);
                assert!(res.abs() < 1e-10, "n={n} p={p} r={r}: {res:e}");
            }
            assert_eq!(prof.u(1.7), 0.0);
        }
    }
}

// Integrating the flux ODE `|u'|^{p-2}u' = -r/n` directly gives `u` without
// the closed form; trapezoid on a fine grid is plenty.
#[test]
fn profiles_agree_with_direct_flux_integration() {
    for (n, p) in [(2, 1.5), (2, 3.0), (3, 2.0), (4, 4.0)] {
        let radius = 1.2;
        let prof = radial_exact(n, p, radius).unwrap();
        let slope = |r: f64| -(r / n as f64).powf(1.0 / (p - 1.0));
        let m = 2_000_000;
        let dr = radius / m as f64;
        let mut u = 0.0;
        for k in (0..m).rev() {
            let (a, b) = (k as f64 * dr, (k + 1) as f64 * dr);
            u -= 0.5 * (slope(a) + slope(b)) * dr;
        }
        assert!((u - prof.u(0.0)).abs() < 1e-8, "n={n} p={p}: {u} vs {}", prof.u(0.0));
        assert!((prof.p_function(0.3) - p_ball_constant(n, p, radius)).abs() < 1e-12);
    }
}

#[test]
fn finite_volume_profile_converges() {
    let exact = radial_exact(2, 3.0, 1.0).unwrap();
    let err = |cells| {
        let fd = radial_fd_solve(2, 3.0, 1.0, cells).unwrap();
        let (r, u) = fd.grid().unwrap();
        r.iter().zip(u).map(|(r, u)| (u - exact.u(*r)).abs()).fold(0.0, f64::max)
    };
    // The profile is only C^{1,1/2} at the origin, so expect order 3/2.
    let (coarse, fine) = (err(500), err(1000));
    assert!(coarse / fine > 2.6, "{coarse:e} -> {fine:e}");
}

#[test]
fn ellipse_integrals_match_a_periodic_trapezoid() {
    for (a, b) in [(1.0, 1.0), (2.0, 1.0), (3.0, 0.5)] {
        let e = ellipse_boundary_integrals(a, b).unwrap();
        let m = 4096;
        let speed = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
        let dt = 2.0 * PI / m as f64;
        let perimeter: f64 = (0..m).map(|k| speed(k as f64 * dt) * dt).sum();
        let inv: f64 = (0..m).map(|k| speed(k as f64 * dt).powi(4) / (a * b) * dt).sum();
        assert!((e.perimeter - perimeter).abs() < 1e-10 * perimeter);
        assert!((e.inverse_curvature_integral - inv).abs() < 1e-10 * inv);
        assert!((e.inverse_curvature_closed_form - inv).abs() < 1e-10 * inv);
        assert!((e.h0 - perimeter / (2.0 * PI * a * b)).abs() < 1e-12);
    }
    let e = ellipse_boundary_integrals(2.0, 1.0).unwrap();
    assert!((e.inverse_curvature_integral - 23.169_246).abs() < 1e-5);
    assert!((e.perimeter / 2.0 - 4.844_224).abs() < 1e-6);
}

#[test]
fn sweep_finds_no_violation_and_is_reproducible() {
    let cfg = SweepConfig::new(50_000, 11);
    let a = matrix_inequality_sweep(&cfg, Exec::Parallel).unwrap();
    assert!(a.min_gap >= -1e-12, "{:?}", a.witness);
    assert_eq!(a.ordering_violations, 0);
    assert!(a.min_gap <= a.min_loose_gap + 1e-12);
    assert_eq!(a, matrix_inequality_sweep(&cfg, Exec::Parallel).unwrap());
    let other = matrix_inequality_sweep(&SweepConfig::new(50_000, 12), Exec::Parallel).unwrap();
    assert_ne!(a.witness, other.witness);
}

#[test]
fn equality_and_strict_witnesses() {
    let diag = |v: &[f64]| DMatrix::from_diagonal(&DVector::from_row_slice(v));
    let e1 = |n: usize| {
        let mut g = DVector::zeros(n);
        g[0] = 1.0;
        g
    };
    // Scalar multiples of the identity with p = 2 are equality cases in every dimension.
    for n in 2..=4 {
        let m = matrix_inequality(2.0, &DMatrix::identity(n, n), &e1(n)).unwrap();
        assert!(m.gap().abs() < 1e-13, "n={n}");
    }
    let m = matrix_inequality(2.0, &diag(&[1.0, 1.0, 2.0]), &e1(3)).unwrap();
    assert!((m.gap() - 0.5).abs() < 1e-13);
}

fn symmetric(n: usize) -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>)> {
    (prop::collection::vec(-1.0f64..1.0, n * n), prop::collection::vec(-1.0f64..1.0, n)).prop_filter_map(
        "nonzero gradient",
        move |(h, g)| {
            let h = DMatrix::from_vec(n, n, h);
            let g = DVector::from_vec(g);
            (g.norm() > 1e-3).then(|| ((&h + h.transpose()) * 0.5, g))
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn refined_inequality_holds_and_is_sharper((h, g) in (2usize..=4).prop_flat_map(symmetric), p in 1.05f64..6.0) {
        let m = matrix_inequality(p, &h, &g).unwrap();
        let scale = 1.0 + m.lhs.abs();
        prop_assert!(m.gap() >= -1e-12 * scale, "gap {}", m.gap());
        prop_assert!(m.loose_gap >= m.gap() - 1e-12 * scale);
        // Both sides are homogeneous of degree 2(p-2) in the gradient.
        let t: f64 = 1.7;
        let k = t.powf(2.0 * (p - 2.0));
        let scaled = matrix_inequality(p, &h, &(&g * t)).unwrap();
        prop_assert!((scaled.gap() - k * m.gap()).abs() <= 1e-9 * scale * k.max(1.0));
    }
}
