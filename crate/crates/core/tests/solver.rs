use plap_core::geometry::{boundary_geometry, build_mesh, DomainSpec};
use plap_core::identities::{boundary_trace, flux_balance};
use plap_core::solver::{convergence_study, solve, Discretization, SolveConfig};
use plap_core::{ConformalMetric, Error};

#[test]
fn accepted_newton_steps_never_increase_the_energy() {
    let mesh = build_mesh(&DomainSpec::ellipse(2.0, 1.0), 0.08).unwrap();
    for p in [1.5, 3.0, 4.0] {
        let sol = solve(&mesh, &ConformalMetric::flat(), &SolveConfig::with_p(p)).unwrap();
        for step in &sol.steps {
            for w in step.energy_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-14 * w[0].abs(), "p={p} eps={} energy rose {} -> {}", step.eps, w[0], w[1]);
            }
        }
    }
}

#[test]
fn regularization_is_inert_for_p_two() {
    let mesh = build_mesh(&DomainSpec::ellipse(1.5, 1.0), 0.06).unwrap();
    let metric = ConformalMetric::flat();
    let first = SolveConfig { eps0: Some(0.5), eps_min: 0.49, ..SolveConfig::with_p(2.0) };
    let a = solve(&mesh, &metric, &first).unwrap();
    let b = solve(&mesh, &metric, &SolveConfig::with_p(2.0)).unwrap();
    let diff = a.u.values().iter().zip(b.u.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-13, "max difference {diff:e}");
}

#[test]
fn boundary_values_vanish_and_interior_is_positive() {
    for spec in [DomainSpec::disk(1.0), DomainSpec::Annulus { inner: 0.4, outer: 1.0 }] {
        let mesh = build_mesh(&spec, 0.08).unwrap();
        let sol = solve(&mesh, &ConformalMetric::flat(), &SolveConfig::with_p(3.0)).unwrap();
        for (v, &u) in sol.u.values().iter().enumerate() {
            if mesh.is_boundary(v) {
                assert_eq!(u, 0.0);
            }
        }
        assert!(sol.diagnostics.interior_positive);
    }
}

#[test]
fn discrete_residual_is_the_energy_gradient() {
    let mesh = build_mesh(&DomainSpec::disk(1.0), 0.2).unwrap();
    let disc = Discretization::new(&mesh, &ConformalMetric::flat(), 3.0, None, Default::default());
    let u: Vec<f64> = mesh.vertices().iter().map(|x| (1.0 - x.norm_squared()) * (1.0 + 0.3 * x.x)).collect();
    let eps = 0.05;
    let asm = disc.assemble(&mesh, &u, eps).unwrap();
    let step = 1e-6;
    for v in (0..mesh.n_vertices()).filter(|&v| !mesh.is_boundary(v)).step_by(7) {
        let (mut up, mut dn) = (u.clone(), u.clone());
        up[v] += step;
        dn[v] -= step;
        let fd = (disc.energy(&mesh, &up, eps).unwrap() - disc.energy(&mesh, &dn, eps).unwrap()) / (2.0 * step);
        assert!((fd - asm.residual[v]).abs() < 1e-7, "vertex {v}: {fd} vs {}", asm.residual[v]);
    }
}

#[test]
fn mirrored_disk_mesh_gives_a_mirrored_solution() {
    let mesh = build_mesh(&DomainSpec::disk(1.0), 0.07).unwrap();
    let mirror = mesh.mirrored_y().unwrap();
    for p in [2.0, 3.0] {
        let a = solve(&mesh, &ConformalMetric::flat(), &SolveConfig::with_p(p)).unwrap();
        let b = solve(&mirror, &ConformalMetric::flat(), &SolveConfig::with_p(p)).unwrap();
        let asym = a.u.values().iter().zip(b.u.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(asym <= 1e-12 * 1e3, "p={p} asymmetry {asym:e}");
    }
}

#[test]
fn newton_budget_exhaustion_reports_history() {
    let mesh = build_mesh(&DomainSpec::ellipse(2.0, 1.0), 0.1).unwrap();
    let cfg = SolveConfig { max_newton_iter: 1, ..SolveConfig::with_p(4.0) };
    let err = solve(&mesh, &ConformalMetric::flat(), &cfg).unwrap_err();
    assert!(matches!(err, Error::NonConvergence { .. }), "{err}");
    assert!(!err.residual_history().unwrap().is_empty());
}

#[test]
fn flux_balances_the_volume_at_convergence() {
    let cases = [
        (DomainSpec::disk(1.0), ConformalMetric::flat()),
        (DomainSpec::ellipse(2.0, 1.0), ConformalMetric::flat()),
        (DomainSpec::disk(1.0), ConformalMetric::spherical_cap(2.0)),
    ];
    for (spec, metric) in cases {
        let mesh = build_mesh(&spec, 0.05).unwrap();
        let bg = boundary_geometry(&spec, &mesh).unwrap();
        let measures = plap_core::geometry::domain_measures(&mesh, &metric).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let sol = solve(&mesh, &metric, &SolveConfig::with_p(p)).unwrap();
            let (_, trace) = boundary_trace(&sol, &mesh, &bg, &metric).unwrap();
            let check = flux_balance(&trace, &measures, 0.01);
            assert!(check.pass, "{spec:?} p={p}: {check:?}");
            assert!((sol.variational_flux() + measures.volume).abs() < 1e-8 * measures.volume);
        }
    }
}

#[test]
fn refinement_orders_against_the_radial_solution() {
    let disk = DomainSpec::disk(1.0);
    let flat = ConformalMetric::flat();
    let hs = [0.1, 0.05, 0.025];
    for (p, order) in [(2.0, 1.8), (3.0, 1.2)] {
        let rows = convergence_study(&disk, &flat, p, &hs).unwrap();
        let last = rows.last().unwrap().order.unwrap();
        assert!(last >= order, "p={p}: L² order {last:.2} < {order} ({rows:?})");
    }
    let rows = convergence_study(&disk, &flat, 1.5, &hs).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].l2.is_finite() && w[1].l2 < w[0].l2 && w[1].linf < w[0].linf, "{rows:?}");
    }
}
