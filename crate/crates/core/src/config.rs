//! JSON experiment configuration.
//!
//! A config names exactly one experiment and carries everything needed to
//! replay it. Unknown keys are rejected so that a typo never silently falls
//! back to a default.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{default_params, EstimatorConfig, LogBase};
use crate::graph::GenSpec;

pub const SCHEMA_VERSION: u32 = 1;

/// Window used for the derivative plots when none is configured.
pub const FIGURE3_DELTA: f64 = 0.075;
pub const DEFAULT_GRID_STEP: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Figure3,
    RecoverySweep,
    HardnessSweep,
    Simulate,
    Estimate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Figure3 => "figure3",
            ExperimentKind::RecoverySweep => "recovery_sweep",
            ExperimentKind::HardnessSweep => "hardness_sweep",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Estimate => "estimate",
        }
    }
}

/// How cascade sources are chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    /// Uniform over all vertices, drawn from the trace seed.
    Uniform,
    /// Trace `k` of every run starts at `vertices[k % len]`.
    Fixed { vertices: Vec<usize> },
}

/// Parameters of the class `G(n, m, d, D)` the instance should belong to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub m: usize,
    pub d: usize,
    /// High-degree threshold; `ceil(n^alpha)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_d: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardnessConfig {
    pub core_size: usize,
    #[serde(default = "default_path_len")]
    pub path_len: usize,
    /// Planted degrees to sweep. A value below 2 is a null row.
    pub planted_degrees: Vec<f64>,
    pub k_values: Vec<usize>,
    #[serde(default = "default_mc_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deg_cap: Option<usize>,
    #[serde(default = "default_rejection_cap")]
    pub rejection_cap: usize,
}

fn default_path_len() -> usize {
    50
}

fn default_mc_samples() -> usize {
    2000
}

fn default_rejection_cap() -> usize {
    crate::hardness::DEFAULT_REJECTION_CAP
}

fn default_lambda() -> f64 {
    1.0
}

fn default_runs() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GenSpec>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Explicit `(delta, tau, K)`; takes precedence over `alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorConfig>,
    #[serde(default)]
    pub log_base: LogBase,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Not echoed into reports: where outputs land does not affect them.
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traces_per_run: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<SourceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<ClassSpec>,
    /// Derivative window for figure3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hardness: Option<HardnessConfig>,
    /// Directory holding `trace_{run}_{k}.csv` files for `estimate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traces_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Minimal config of the given kind with every optional field unset.
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment,
            graph: None,
            lambda: 1.0,
            alpha: None,
            estimator: None,
            log_base: LogBase::Natural,
            runs: 1,
            master_seed: 0,
            output_dir: default_output_dir(),
            traces_per_run: None,
            sources: None,
            class: None,
            delta: None,
            grid_step: None,
            hardness: None,
            traces_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.75 && a < 1.0) {
                return bad(format!("alpha = {a} is outside (3/4, 1)"));
            }
        }
        if let Some(e) = &self.estimator {
            e.validate()?;
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("delta must be positive, got {d}"));
            }
        }
        if let Some(s) = self.grid_step {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("grid_step must be positive, got {s}"));
            }
        }
        if self.traces_per_run == Some(0) {
            return bad("traces_per_run must be at least 1".into());
        }
        if let Some(SourceSpec::Fixed { vertices }) = &self.sources {
            if vertices.is_empty() {
                return bad("fixed sources need at least one vertex".into());
            }
        }
        match self.experiment {
            ExperimentKind::Figure3 => {}
            ExperimentKind::Simulate => {
                if self.graph.is_none() {
                    return bad("simulate needs a graph".into());
                }
            }
            ExperimentKind::RecoverySweep => {
                if self.graph.is_none() {
                    return bad("recovery_sweep needs a graph".into());
                }
                if self.class.is_none() {
                    return bad("recovery_sweep needs class {m, d}".into());
                }
                self.require_estimator_source()?;
            }
            ExperimentKind::Estimate => {
                if self.traces_dir.is_none() {
                    return bad("estimate needs traces_dir".into());
                }
                self.require_estimator_source()?;
            }
            ExperimentKind::HardnessSweep => {
                let Some(h) = &self.hardness else {
                    return bad("hardness_sweep needs a hardness section".into());
                };
                if h.core_size < 2 || h.path_len < 1 || h.samples == 0 || h.rejection_cap == 0 {
                    return bad(format!("invalid hardness section {h:?}"));
                }
                if h.k_values.is_empty() || h.k_values.contains(&0) {
                    return bad("k_values must be non-empty and positive".into());
                }
                if h.planted_degrees.is_empty() {
                    return bad("planted_degrees must be non-empty".into());
                }
                for &d in &h.planted_degrees {
                    if !(d >= 0.0 && d <= h.core_size as f64) {
                        return bad(format!("planted degree {d} outside [0, N]"));
                    }
                }
            }
        }
        Ok(())
    }

    fn require_estimator_source(&self) -> Result<()> {
        if self.alpha.is_none() && self.estimator.is_none() {
            return Err(Error::InvalidParameter(
                "either alpha or an explicit estimator {delta, tau, k} is required".into(),
            ));
        }
        Ok(())
    }

    /// Estimator parameters for a graph on `n` vertices.
    pub fn estimator_for(&self, n: usize) -> Result<EstimatorConfig> {
        match (self.estimator, self.alpha) {
            (Some(e), _) => Ok(e),
            (None, Some(alpha)) => default_params(n, alpha, self.log_base),
            (None, None) => Err(Error::InvalidParameter(
                "either alpha or an explicit estimator is required".into(),
            )),
        }
    }

    pub fn grid_step(&self) -> f64 {
        self.grid_step.unwrap_or(DEFAULT_GRID_STEP)
    }
}
