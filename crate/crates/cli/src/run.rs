use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use plap_core::fields::{self, ScalarField};
use plap_core::geometry::{boundary_geometry, build_mesh, DomainSpec, Vec2};
use plap_core::identities::{self, IdentityReport};
use plap_core::oracles::{self, SweepConfig};
use plap_core::par::{map_slice, Exec};
use plap_core::solver::{self, nodal_errors};
use plap_core::{BoundaryTrace, ConformalMetric, Solution, TriMesh};
use serde_json::json;

use crate::config::{Command, ConfigError, ExperimentConfig};
use crate::report::{self, MatcheckReport, RadialReport, Report, RunReport, SolveSummary, REPORT_VERSION};

const RADIAL_CELLS: usize = 4000;
const RADIAL_TOL: f64 = 1e-3;
const SLICE_POINTS: usize = 201;

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Output { path: PathBuf, message: String },
    Solver { p: f64, h: f64, error: plap_core::Error },
}

impl Failure {
    pub fn config(message: String) -> Self {
        Failure::Config(message)
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) | Failure::Output { .. } => 2,
            Failure::Solver { .. } => 3,
        }
    }

    pub fn to_json(&self) -> String {
        let body = match self {
            Failure::Config(m) => json!({ "kind": "config", "message": m }),
            Failure::Output { path, message } => {
                json!({ "kind": "output", "path": path.display().to_string(), "message": message })
            }
            Failure::Solver { p, h, error } => json!({
                "kind": "solver",
                "p": p,
                "h": h,
                "message": error.to_string(),
                "residual_history": error.residual_history(),
            }),
        };
        json!({ "error": { "exit_code": self.exit_code(), "detail": body } }).to_string()
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn create(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Output { path: dir.into(), message: e.to_string() })?;
        Ok(Output { dir: dir.into() })
    }

    fn write(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), Failure> {
        let path = self.dir.join(name);
        let fail = |e: std::io::Error| Failure::Output { path: path.clone(), message: e.to_string() };
        let mut w = BufWriter::new(File::create(&path).map_err(fail)?);
        f(&mut w).and_then(|_| w.flush()).map_err(fail)
    }

    fn report(&self, report: &Report) -> Result<(), Failure> {
        self.write("report.json", |w| {
            serde_json::to_writer_pretty(&mut *w, report)?;
            writeln!(w)
        })
    }
}

fn timestamp() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn warn_empty(command: Command) -> Result<u8, Failure> {
    eprintln!("warning: `{}` has nothing to run (empty grid); no files written", command.name());
    Ok(0)
}

pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<u8, Failure> {
    match command {
        Command::Solve | Command::Verify | Command::Sweep => grid(command, cfg),
        Command::Radial => radial(cfg),
        Command::Matcheck => matcheck(cfg),
    }
}

struct GridPoint {
    mesh: TriMesh,
    sol: Solution,
    run: RunReport,
    trace: Option<BoundaryTrace>,
    p_nodal: Option<ScalarField>,
}

fn solve_point(command: Command, cfg: &ExperimentConfig, metric: &ConformalMetric, p: f64, h: f64) -> Result<GridPoint, Failure> {
    let fail = |error| Failure::Solver { p, h, error };
    let mesh = build_mesh(&cfg.domain, h).map_err(fail)?;
    // Certify Ric ≥ 0 when possible so the subharmonicity scan can run.
    let metric = metric.clone().declare_nonnegative_ricci(&mesh).unwrap_or_else(|_| metric.clone());
    let sol = solver::solve(&mesh, &metric, &cfg.solver.apply(p)).map_err(fail)?;
    let radial_max_error = match cfg.domain {
        DomainSpec::Disk { radius } if metric.is_flat() => {
            let exact = oracles::radial_exact(2, p, radius).map_err(fail)?;
            Some(nodal_errors(&mesh, sol.u.values(), |x| exact.u(x.norm())).0)
        }
        _ => None,
    };
    let last = sol.steps.last();
    let solve = SolveSummary {
        final_eps: sol.final_eps,
        eps_steps: sol.steps.len(),
        newton_iterations: sol.steps.iter().map(|s| s.iterations).sum(),
        final_residual: last.map_or(0.0, |s| s.final_residual()),
        final_energy: last.map_or(0.0, |s| s.final_energy()),
        min_u: sol.diagnostics.min_u,
        max_u: sol.diagnostics.max_u,
        critical_fraction: sol.diagnostics.critical_fraction,
        dofs: sol.diagnostics.n_dofs,
    };
    let (identities, trace, p_nodal) = if command == Command::Solve {
        (None, None, None)
    } else {
        let bg = boundary_geometry(&cfg.domain, &mesh).map_err(fail)?;
        let (rep, bundle, trace): (IdentityReport, _, _) =
            identities::identity_report(&sol, &mesh, &bg, &metric, &cfg.tolerances).map_err(fail)?;
        let pn = fields::p_function_nodal(&sol.u, &mesh, &bundle, p).map_err(fail)?;
        (Some(rep), Some(trace), Some(pn))
    };
    let run = RunReport {
        p,
        h,
        vertices: mesh.n_vertices(),
        triangles: mesh.n_triangles(),
        solve,
        radial_max_error,
        identities,
    };
    Ok(GridPoint { mesh, sol, run, trace, p_nodal })
}

fn grid(command: Command, cfg: &ExperimentConfig) -> Result<u8, Failure> {
    let points: Vec<(f64, f64)> = cfg.p.iter().flat_map(|&p| cfg.h.iter().map(move |&h| (p, h))).collect();
    if points.is_empty() {
        return warn_empty(command);
    }
    let metric = cfg.metric.build().map_err(|e| Failure::Config(e.to_string()))?;
    let results = map_slice(Exec::Parallel, &points, |&(p, h)| solve_point(command, cfg, &metric, p, h));
    let points = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let out = Output::create(&cfg.output)?;
    for gp in &points {
        let tag = report::tag(gp.run.p, gp.run.h);
        match command {
            Command::Solve => {
                out.write(&format!("solution_{tag}.csv"), |w| {
                    gp.sol.write_csv(&gp.mesh, w).map_err(|e| std::io::Error::other(e.to_string()))
                })?;
            }
            Command::Verify => {
                if let Some(trace) = &gp.trace {
                    out.write(&format!("boundary_{tag}.csv"), |w| identities::write_boundary_profile(w, trace))?;
                }
                if let Some(pn) = &gp.p_nodal {
                    out.write(&format!("slice_{tag}.csv"), |w| write_slice(w, &gp.mesh, &cfg.domain, gp.sol.u.values(), pn.values()))?;
                }
            }
            _ => {}
        }
    }
    let runs: Vec<RunReport> = points.into_iter().map(|gp| gp.run).collect();
    match command {
        Command::Verify => out.write("convergence.csv", |w| report::write_convergence_csv(w, &runs))?,
        Command::Sweep => out.write("sweep.csv", |w| report::write_sweep_csv(w, &runs))?,
        _ => {}
    }
    let all_pass = runs.iter().all(|r| r.identities.as_ref().map_or(true, IdentityReport::all_pass));
    for r in &runs {
        if let Some(rep) = &r.identities {
            for c in rep.checks.iter().filter(|c| !c.pass) {
                eprintln!(
                    "check failed: p={} h={} {} relative residual {:.3e} > {:.3e}",
                    r.p, r.h, c.name, c.relative_residual, c.tolerance
                );
            }
        }
    }
    let report = Report {
        version: REPORT_VERSION,
        command: command.name().into(),
        timestamp: timestamp(),
        config: cfg.clone(),
        runs,
        radial: Vec::new(),
        matcheck: None,
        all_pass,
    };
    out.report(&report)?;
    println!("{}: {} run(s), all_pass = {all_pass}, output in {}", command.name(), report.runs.len(), cfg.output.display());
    Ok(if all_pass { 0 } else { 1 })
}

/// `u` and `P` along the horizontal diameter.
fn write_slice<W: Write>(mut w: W, mesh: &TriMesh, domain: &DomainSpec, u: &[f64], p: &[f64]) -> std::io::Result<()> {
    let half = 0.5 * domain.diameter();
    let (a, b) = (Vec2::new(-half, 0.0), Vec2::new(half, 0.0));
    writeln!(w, "x,y,u,P")?;
    let us = identities::field_slice(mesh, u, a, b, SLICE_POINTS);
    let ps = identities::field_slice(mesh, p, a, b, SLICE_POINTS);
    for ((x, uv), (_, pv)) in us.iter().zip(&ps) {
        writeln!(w, "{},{},{},{}", x.x, x.y, uv, pv)?;
    }
    Ok(())
}

fn radial(cfg: &ExperimentConfig) -> Result<u8, Failure> {
    let DomainSpec::Disk { radius } = cfg.domain else {
        return Err(Failure::Config("`radial` needs a disk domain".into()));
    };
    if cfg.p.is_empty() {
        return warn_empty(Command::Radial);
    }
    let mut reports = Vec::new();
    let mut profiles = Vec::new();
    for &p in &cfg.p {
        let fail = |error| Failure::Solver { p, h: radius / RADIAL_CELLS as f64, error };
        let exact = oracles::radial_exact(2, p, radius).map_err(fail)?;
        let fd = oracles::radial_fd_solve(2, p, radius, RADIAL_CELLS).map_err(fail)?;
        let (r, u) = fd.grid().expect("finite-volume profiles carry a grid");
        let fd_max_error = r.iter().zip(u).map(|(r, u)| (u - exact.u(*r)).abs()).fold(0.0, f64::max);
        reports.push(RadialReport {
            p,
            radius,
            u_center: exact.u(0.0),
            boundary_slope: exact.boundary_slope(),
            p_constant: oracles::p_ball_constant(2, p, radius),
            fd_max_error,
            fd_boundary_slope: fd.boundary_slope(),
            pass: fd_max_error <= RADIAL_TOL * exact.u(0.0),
        });
        profiles.push((exact, fd));
    }
    let out = Output::create(&cfg.output)?;
    for (exact, fd) in &profiles {
        out.write(&format!("radial_p{}.csv", exact.p), |w| {
            writeln!(w, "r,u,du,P,u_fd")?;
            for k in 0..=200 {
                let r = radius * k as f64 / 200.0;
                writeln!(w, "{},{},{},{},{}", r, exact.u(r), exact.du(r), exact.p_function(r), fd.u(r))?;
            }
            Ok(())
        })?;
    }
    let all_pass = reports.iter().all(|r| r.pass);
    let report = Report {
        version: REPORT_VERSION,
        command: Command::Radial.name().into(),
        timestamp: timestamp(),
        config: cfg.clone(),
        runs: Vec::new(),
        radial: reports,
        matcheck: None,
        all_pass,
    };
    out.report(&report)?;
    println!("radial: {} profile(s), all_pass = {all_pass}", report.radial.len());
    Ok(if all_pass { 0 } else { 1 })
}

fn matcheck(cfg: &ExperimentConfig) -> Result<u8, Failure> {
    let m = &cfg.matcheck;
    if m.samples == 0 {
        return warn_empty(Command::Matcheck);
    }
    let sweep = SweepConfig { samples: m.samples, seed: cfg.seed, dims: m.dims.clone(), p_range: m.p_range, shards: 64 };
    sweep.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let result = oracles::matrix_inequality_sweep(&sweep, Exec::Parallel).map_err(|error| Failure::Solver {
        p: f64::NAN,
        h: f64::NAN,
        error,
    })?;
    let pass = result.min_gap >= -1e-12 && result.ordering_violations == 0;
    let out = Output::create(&cfg.output)?;
    out.write("matcheck_witnesses.csv", |w| oracles::write_sweep_csv(w, &result.per_dimension))?;
    let report = Report {
        version: REPORT_VERSION,
        command: Command::Matcheck.name().into(),
        timestamp: timestamp(),
        config: cfg.clone(),
        runs: Vec::new(),
        radial: Vec::new(),
        matcheck: Some(MatcheckReport { seed: cfg.seed, result, pass }),
        all_pass: pass,
    };
    out.report(&report)?;
    println!("matcheck: {} samples, pass = {pass}", m.samples);
    Ok(if pass { 0 } else { 1 })
}
