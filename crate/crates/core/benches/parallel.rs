use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use plap_core::fields::{Recovery, RecoveryOptions};
use plap_core::geometry::{build_mesh, DomainSpec};
use plap_core::oracles::{matrix_inequality_sweep, SweepConfig};
use plap_core::par::Exec;
use plap_core::solver::{solve, Discretization, SolveConfig};
use plap_core::ConformalMetric;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn assembly(c: &mut Criterion) {
    let mesh = build_mesh(&DomainSpec::ellipse(2.0, 1.0), 0.03).unwrap();
    let metric = ConformalMetric::flat();
    let u: Vec<f64> = mesh.vertices().iter().map(|x| 0.4 * (1.0 - x.x * x.x / 4.0 - x.y * x.y)).collect();
    let mut group = c.benchmark_group("assembly");
    for (name, exec) in MODES {
        let disc = Discretization::new(&mesh, &metric, 3.0, None, exec);
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| disc.assemble(&mesh, &u, 1e-3).unwrap()));
    }
    group.finish();
}

fn recovery(c: &mut Criterion) {
    let mesh = build_mesh(&DomainSpec::ellipse(2.0, 1.0), 0.03).unwrap();
    let sol = solve(&mesh, &ConformalMetric::flat(), &SolveConfig::with_p(2.0)).unwrap();
    let mut group = c.benchmark_group("recovery");
    for (name, exec) in MODES {
        let opts = RecoveryOptions { exec, ..Default::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| Recovery::new(&mesh, &opts).derivatives(sol.u.values()))
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let cfg = SweepConfig::new(100_000, 3);
    let mut group = c.benchmark_group("matrix_sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| matrix_inequality_sweep(&cfg, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, assembly, recovery, sweep);
criterion_main!(benches);
