use std::path::{Path, PathBuf};

use plap_core::geometry::DomainSpec;
use plap_core::identities::Tolerances;
use plap_core::metric::MetricSpec;
use plap_core::SolveConfig;
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Solve,
    Verify,
    Sweep,
    Matcheck,
    Radial,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
            Command::Matcheck => "matcheck",
            Command::Radial => "radial",
        }
    }
}

/// Solver parameters that may be overridden; `p` comes from the grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub eps0: Option<f64>,
    pub rho: Option<f64>,
    pub eps_min: Option<f64>,
    pub newton_tol: Option<f64>,
    pub max_newton_iter: Option<usize>,
    pub backtrack: Option<f64>,
    pub max_backtracks: Option<usize>,
    pub armijo: Option<f64>,
}

impl SolverOverrides {
    pub fn apply(&self, p: f64) -> SolveConfig {
        let mut c = SolveConfig::with_p(p);
        c.eps0 = self.eps0.or(c.eps0);
        c.rho = self.rho.unwrap_or(c.rho);
        c.eps_min = self.eps_min.unwrap_or(c.eps_min);
        c.newton_tol = self.newton_tol.unwrap_or(c.newton_tol);
        c.max_newton_iter = self.max_newton_iter.unwrap_or(c.max_newton_iter);
        c.backtrack = self.backtrack.unwrap_or(c.backtrack);
        c.max_backtracks = self.max_backtracks.unwrap_or(c.max_backtracks);
        c.armijo = self.armijo.unwrap_or(c.armijo);
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatcheckConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_p_range")]
    pub p_range: [f64; 2],
}

fn default_samples() -> usize {
    1_000_000
}
fn default_dims() -> Vec<usize> {
    vec![2, 3, 4]
}
fn default_p_range() -> [f64; 2] {
    [1.1, 6.0]
}

impl Default for MatcheckConfig {
    fn default() -> Self {
        MatcheckConfig { samples: default_samples(), dims: default_dims(), p_range: default_p_range() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Must agree with the command line when present.
    #[serde(default)]
    pub command: Option<Command>,
    pub domain: DomainSpec,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default)]
    pub p: Vec<f64>,
    #[serde(default)]
    pub h: Vec<f64>,
    #[serde(default)]
    pub solver: SolverOverrides,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub matcheck: MatcheckConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_output() -> PathBuf {
    PathBuf::from("plap-out")
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("invalid value: {0}")]
    Invalid(String),
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range checks the type system cannot express; run before any computation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let schema = |m: String| Err(ConfigError::Schema(m));
        if self.version != CONFIG_VERSION {
            return schema(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if let Some(&p) = self.p.iter().find(|p| !(**p > 1.0 && p.is_finite())) {
            return schema(format!("p must exceed 1, got {p}"));
        }
        if let Some(&h) = self.h.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return schema(format!("h must be positive, got {h}"));
        }
        let s = &self.solver;
        if let Some(rho) = s.rho {
            if !(rho > 0.0 && rho < 1.0) {
                return schema(format!("solver.rho must lie in (0, 1), got {rho}"));
            }
        }
        if let Some(b) = s.backtrack {
            if !(b > 0.0 && b < 1.0) {
                return schema(format!("solver.backtrack must lie in (0, 1), got {b}"));
            }
        }
        if let Some(a) = s.armijo {
            if !(a > 0.0 && a < 0.5) {
                return schema(format!("solver.armijo must lie in (0, 1/2), got {a}"));
            }
        }
        if s.max_newton_iter == Some(0) {
            return schema("solver.max_newton_iter must be at least 1".into());
        }
        for (name, v) in [("eps0", s.eps0), ("eps_min", s.eps_min), ("newton_tol", s.newton_tol)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return schema(format!("solver.{name} must be positive, got {v}"));
                }
            }
        }
        let invalid = |e: plap_core::Error| ConfigError::Invalid(e.to_string());
        self.domain.validate().map_err(invalid)?;
        self.metric.build().map_err(invalid)?;
        for &p in &self.p {
            self.solver.apply(p).validate().map_err(invalid)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"version": 1, "domain": {"kind": "disk", "radius": 1.0}, "p": [2.0], "h": [0.1]}"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.metric, MetricSpec::default());
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert_eq!(cfg.solver.apply(2.0), SolveConfig::with_p(2.0));
        assert_eq!(cfg.command, None);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("\"p\"", "\"typo\": 1, \"p\"");
        assert!(matches!(ExperimentConfig::parse(&text), Err(ConfigError::Schema(_))));
        let text = MINIMAL.replace("\"radius\": 1.0", "\"radius\": 1.0, \"center\": 0");
        assert!(matches!(ExperimentConfig::parse(&text), Err(ConfigError::Schema(_))));
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        for bad in [
            MINIMAL.replace("\"h\": [0.1]", "\"h\": [0.1], \"solver\": {\"rho\": 1.5}"),
            MINIMAL.replace("[2.0]", "[1.0]"),
            MINIMAL.replace("[0.1]", "[-0.1]"),
            MINIMAL.replace("\"version\": 1", "\"version\": 7"),
        ] {
            assert!(matches!(ExperimentConfig::parse(&bad), Err(ConfigError::Schema(_))), "{bad}");
        }
        let bad = MINIMAL.replace("\"radius\": 1.0", "\"radius\": -1.0");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(ConfigError::Invalid(_))));
    }
}
