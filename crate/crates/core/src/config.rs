//! Run configuration files.
//!
//! A config is a versioned JSON document; unknown keys are rejected and every
//! error carries the line and column it refers to. The bundled preset holds
//! the defaults of every experiment.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dist::{ArrivalLaw, LeadTimeLaw, ServiceLaw};
use crate::engine::{Discipline, SimConfig};
use crate::error::{Error, Result};
use crate::harness::{ConstantLeadStudy, ScalingStudy, Thresholds};
use crate::scaling::even_grid;

pub const CONFIG_VERSION: u32 = 1;

/// The bundled preset.
pub const PRESET: &str = include_str!("../presets/default.json");

/// JSON Schema describing [`RunConfig`].
pub const SCHEMA: &str = include_str!("../schema/run_config.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    Table1,
    QqLateness,
    QqFrontier,
    Collapse,
    Residuals,
    EmpiricalProcess,
    Covariance,
    LimitSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

/// Explicit points or `points` evenly spaced values on `[from, to]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Points(Vec<f64>),
    Even { from: f64, to: f64, points: usize },
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GridSpec::Points(v) => v.clone(),
            GridSpec::Even { from, to, points } => even_grid(*from, *to, *points),
        }
    }
}

/// One trajectory for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub arrival: ArrivalLaw,
    pub service: ServiceLaw,
    pub lead_time: LeadTimeLaw,
    pub n: f64,
    pub horizon: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub retain_arrival_log: bool,
    #[serde(default)]
    pub discipline: Discipline,
}

/// Constant-lead M/G/1 study for `table1`, `qq-lateness` and `qq-frontier`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantLeadSection {
    pub service: ServiceLaw,
    pub arrival_rate: f64,
    pub lead: f64,
    pub horizon: f64,
    pub replications: usize,
}

/// Sequence-of-systems study for `collapse`, `residuals` and
/// `empirical-process`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    pub law: LeadTimeLaw,
    pub service: ServiceLaw,
    pub gamma: f64,
    pub scaled_time: f64,
    pub n_list: Vec<f64>,
    pub replications: usize,
    #[serde(default)]
    pub y_grid: Option<GridSpec>,
    pub limit_draws: usize,
}

/// Limit-object evaluation for `covariance` and `limit-sample`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitSection {
    pub arrival: ArrivalLaw,
    pub service: ServiceLaw,
    pub law: LeadTimeLaw,
    pub n: f64,
    #[serde(default)]
    pub y_grid: Option<GridSpec>,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    pub base_seed: u64,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub output_dir: Option<String>,
    pub formats: Vec<OutputFormat>,
    pub thresholds: Thresholds,
    pub simulation: SimulationSection,
    pub constant_lead: ConstantLeadSection,
    pub scaling: ScalingSection,
    pub limit: LimitSection,
}

/// 1-based `(line, column)` of the first occurrence of `"key"` in `text`.
fn locate(text: &str, key: &str) -> (usize, usize) {
    let needle = format!("\"{key}\"");
    for (i, line) in text.lines().enumerate() {
        if let Some(col) = line.find(&needle) {
            return (i + 1, col + 1);
        }
    }
    (1, 1)
}

fn at(text: &str, key: &str, message: impl Into<String>) -> Error {
    let (line, column) = locate(text, key);
    Error::Config {
        line,
        column,
        message: message.into(),
    }
}

impl RunConfig {
    /// Parse and validate a config document.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            // serde_json appends its own position; the error carries it separately
            let full = e.to_string();
            let suffix = format!(" at line {} column {}", e.line(), e.column());
            Error::Config {
                line: e.line(),
                column: e.column(),
                message: full.strip_suffix(&suffix).unwrap_or(&full).to_string(),
            }
        })?;
        cfg.check(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn preset() -> Self {
        Self::parse(PRESET).expect("bundled preset is valid")
    }

    /// Semantic checks; errors point at the offending key in `text`.
    pub fn check(&self, text: &str) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(at(
                text,
                "version",
                format!(
                    "unsupported version {} (expected {CONFIG_VERSION})",
                    self.version
                ),
            ));
        }
        self.sim_config(self.base_seed)
            .validate()
            .map_err(|e| at(text, "simulation", e.to_string()))?;
        let c = &self.constant_lead;
        if c.replications == 0 {
            return Err(at(text, "replications", "replications must be at least 1"));
        }
        self.constant_lead_study(c.service)
            .sim_config()
            .and_then(|s| s.validate())
            .map_err(|e| at(text, "constant_lead", e.to_string()))?;
        if !(c.arrival_rate / c.service.rate() < 1.0) {
            return Err(at(
                text,
                "arrival_rate",
                "traffic intensity must be below 1",
            ));
        }
        let s = &self.scaling;
        if s.replications == 0 || s.n_list.is_empty() || !s.n_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(at(
                text,
                "n_list",
                "n_list must be nonempty and strictly increasing, replications >= 1",
            ));
        }
        for &n in &s.n_list {
            self.scaling_study()
                .sim_config(n, false)
                .and_then(|c| c.validate())
                .map_err(|e| at(text, "scaling", e.to_string()))?;
        }
        if let Some(g) = &s.y_grid {
            check_grid(text, &g.values(), &s.law)?;
        }
        let l = &self.limit;
        l.arrival
            .validate()
            .map_err(|e| at(text, "limit", e.to_string()))?;
        l.service
            .validate()
            .map_err(|e| at(text, "limit", e.to_string()))?;
        if !(l.n >= 1.0) || l.draws == 0 {
            return Err(at(
                text,
                "limit",
                "limit section needs n >= 1 and draws >= 1",
            ));
        }
        if let Some(g) = &l.y_grid {
            check_grid(text, &g.values(), &l.law)?;
        }
        Ok(())
    }

    pub fn sim_config(&self, base_seed: u64) -> SimConfig {
        let s = &self.simulation;
        SimConfig {
            arrival: s.arrival,
            service: s.service,
            lead_time: s.lead_time.clone(),
            n: s.n,
            horizon: s.horizon,
            base_seed,
            snapshot_times: s.snapshot_times.clone(),
            retain_arrival_log: s.retain_arrival_log,
            discipline: s.discipline,
        }
    }

    pub fn constant_lead_study(&self, service: ServiceLaw) -> ConstantLeadStudy {
        let c = &self.constant_lead;
        ConstantLeadStudy {
            service,
            arrival_rate: c.arrival_rate,
            lead: c.lead,
            horizon: c.horizon,
            replications: c.replications,
            base_seed: self.base_seed,
            workers: self.workers,
            thresholds: self.thresholds,
        }
    }

    pub fn scaling_study(&self) -> ScalingStudy {
        let s = &self.scaling;
        ScalingStudy {
            law: s.law.clone(),
            service: s.service,
            gamma: s.gamma,
            scaled_time: s.scaled_time,
            n_list: s.n_list.clone(),
            replications: s.replications,
            y_grid: s.y_grid.as_ref().map(GridSpec::values).unwrap_or_default(),
            limit_draws: s.limit_draws,
            base_seed: self.base_seed,
            workers: self.workers,
            thresholds: self.thresholds,
        }
    }
}

fn check_grid(text: &str, grid: &[f64], law: &LeadTimeLaw) -> Result<()> {
    if grid.is_empty() || !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(at(
            text,
            "y_grid",
            "y_grid must be nonempty and strictly increasing",
        ));
    }
    if let Some(y) = grid.iter().find(|&&y| y > law.y_star()) {
        return Err(at(
            text,
            "y_grid",
            format!("grid point {y} lies above y* = {}", law.y_star()),
        ));
    }
    Ok(())
}
