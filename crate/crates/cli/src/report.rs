use std::collections::BTreeSet;
use std::io::Write;

use plap_core::identities::IdentityReport;
use plap_core::oracles::SweepResult;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub version: u32,
    pub command: String,
    /// Seconds since the Unix epoch; the only nondeterministic field.
    pub timestamp: u64,
    pub config: ExperimentConfig,
    #[serde(default)]
    pub runs: Vec<RunReport>,
    #[serde(default)]
    pub radial: Vec<RadialReport>,
    #[serde(default)]
    pub matcheck: Option<MatcheckReport>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub p: f64,
    pub h: f64,
    pub vertices: usize,
    pub triangles: usize,
    pub solve: SolveSummary,
    /// Max nodal error against the radial solution, on flat disks.
    #[serde(default)]
    pub radial_max_error: Option<f64>,
    #[serde(default)]
    pub identities: Option<IdentityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSummary {
    pub final_eps: f64,
    pub eps_steps: usize,
    pub newton_iterations: usize,
    pub final_residual: f64,
    pub final_energy: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub critical_fraction: f64,
    pub dofs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialReport {
    pub p: f64,
    pub radius: f64,
    pub u_center: f64,
    pub boundary_slope: f64,
    pub p_constant: f64,
    /// Max difference between the finite-volume and closed-form profiles.
    pub fd_max_error: f64,
    pub fd_boundary_slope: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatcheckReport {
    pub seed: u64,
    pub result: SweepResult,
    pub pass: bool,
}

pub fn tag(p: f64, h: f64) -> String {
    format!("p{p}_h{h}")
}

/// One row per run: grid point, every report value, check residuals and flags.
pub fn write_sweep_csv<W: Write>(mut w: W, runs: &[RunReport]) -> std::io::Result<()> {
    let reports: Vec<&IdentityReport> = runs.iter().filter_map(|r| r.identities.as_ref()).collect();
    let values: BTreeSet<&str> = reports.iter().flat_map(|r| r.values.keys().map(String::as_str)).collect();
    let checks: BTreeSet<&str> = reports.iter().flat_map(|r| r.checks.iter().map(|c| c.name.as_str())).collect();
    let flags: BTreeSet<&str> = reports.iter().flat_map(|r| r.flags.keys().map(String::as_str)).collect();
    let mut header = vec!["p".to_string(), "h".into(), "volume".into(), "perimeter".into(), "h0".into(), "masked_fraction".into()];
    header.extend(values.iter().map(|k| k.to_string()));
    header.extend(checks.iter().map(|k| format!("{k}.relative_residual")));
    header.extend(checks.iter().map(|k| format!("{k}.pass")));
    header.extend(flags.iter().map(|k| k.to_string()));
    header.push("all_pass".into());
    writeln!(w, "{}", header.join(","))?;
    for run in runs {
        let Some(r) = &run.identities else { continue };
        let mut row = vec![
            run.p.to_string(),
            run.h.to_string(),
            r.volume.to_string(),
            r.perimeter.to_string(),
            r.h0.to_string(),
            r.masked_fraction.to_string(),
        ];
        row.extend(values.iter().map(|k| r.values.get(*k).map(f64::to_string).unwrap_or_default()));
        row.extend(checks.iter().map(|k| r.check(k).map(|c| c.relative_residual.to_string()).unwrap_or_default()));
        row.extend(checks.iter().map(|k| r.check(k).map(|c| c.pass.to_string()).unwrap_or_default()));
        row.extend(flags.iter().map(|k| r.flags.get(*k).map(bool::to_string).unwrap_or_default()));
        row.push(r.all_pass().to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Identity deficits against `h`, one row per run.
pub fn write_convergence_csv<W: Write>(mut w: W, runs: &[RunReport]) -> std::io::Result<()> {
    writeln!(w, "p,h,serrin_deficit,flux_residual,fundamental_volume_residual,fundamental_boundary_residual,hk_residual,radial_max_error")?;
    for run in runs {
        let Some(r) = &run.identities else { continue };
        let rel = |name: &str| r.check(name).map(|c| c.relative_residual.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            run.p,
            run.h,
            r.value("serrin.deficit").map(|v| v.to_string()).unwrap_or_default(),
            rel("flux_balance"),
            rel("fundamental.volume_vs_rhs"),
            rel("fundamental.boundary_vs_rhs"),
            rel("hk.identity"),
            run.radial_max_error.map(|v| v.to_string()).unwrap_or_default(),
        )?;
    }
    Ok(())
}
