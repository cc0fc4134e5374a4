//! Experiment configuration files.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use coopstab::measure::TTotalRule;
use coopstab::ModelSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub equilibria: Option<EquilibriaBlock>,
    pub simulate: Option<SimulateBlock>,
    pub stationary: Option<StationaryBlock>,
    pub sweep: Option<SweepBlock>,
    pub quasipotential: Option<QuasipotentialBlock>,
    pub verify: Option<VerifyBlock>,
    pub table1: Option<Table1Block>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }

    /// Parses `text`, checking it against the published schema first.
    pub fn parse(text: &str) -> Result<Self, String> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let errors: Vec<String> = schema().iter_errors(&value).map(|e| format!("{}: {e}", e.instance_path())).collect();
        if !errors.is_empty() {
            return Err(errors.join("; "));
        }
        serde_json::from_value(value).map_err(|e| e.to_string())
    }

    pub fn model(&self) -> Result<&ModelSpec, CliError> {
        self.model.as_ref().ok_or_else(|| CliError::Validation("config has no \"model\" block".into()))
    }
}

pub const CONFIG_SCHEMA: &str = include_str!("../../../docs/schema/config.schema.json");

fn schema() -> &'static jsonschema::Validator {
    static SCHEMA: OnceLock<jsonschema::Validator> = OnceLock::new();
    SCHEMA.get_or_init(|| {
        let doc = serde_json::from_str(CONFIG_SCHEMA).expect("config schema is valid JSON");
        jsonschema::validator_for(&doc).expect("config schema compiles")
    })
}

fn default_step() -> f64 {
    1e-3
}

fn default_burn_in() -> f64 {
    0.2
}

fn default_delta() -> f64 {
    0.2
}

fn default_bins() -> usize {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriaBlock {
    /// Newton seeds; required for non-Griffith models.
    #[serde(default)]
    pub seeds: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    pub x0: Vec<f64>,
    pub eps: f64,
    pub t: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "one")]
    pub n_paths: usize,
    #[serde(default = "one")]
    pub record_every: usize,
    pub blowup_guard: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryBlock {
    /// Start point; defaults to the first stable Griffith equilibrium.
    pub x0: Option<Vec<f64>>,
    pub eps: f64,
    /// Run length; defaults to the scaling rule.
    pub t_total: Option<f64>,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    /// Ball radius in units of `|V0|` (Griffith) or absolute (other models).
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    pub grid: Option<GridBlock>,
    #[serde(default)]
    pub rule: TTotalRule,
    pub blowup_guard: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub bins: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub eps: Vec<f64>,
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub rule: TTotalRule,
    #[serde(default = "default_slack")]
    pub slack: f64,
}

fn default_slack() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasipotentialBlock {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t_grid: Option<Vec<f64>>,
    #[serde(default = "default_segments")]
    pub n_segments: usize,
    /// Radius of the arrival ball around `y`; `null` demands exact arrival.
    #[serde(default = "default_eta")]
    pub eta: Option<f64>,
    pub escape: Option<EscapeBlock>,
    pub max_iters: Option<usize>,
}

fn default_segments() -> usize {
    200
}

fn default_eta() -> Option<f64> {
    Some(1e-2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscapeBlock {
    pub delta: f64,
    pub direction: Vec<f64>,
    pub attractor: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    /// Box for the H1 and H3 grids; defaults to `[-3, 3]^r`.
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    #[serde(default = "default_grid_n")]
    pub n: usize,
    pub h2: Option<H2Block>,
    pub h3: Option<H3Block>,
    #[serde(default = "default_pairs")]
    pub monotonicity_pairs: usize,
}

fn default_grid_n() -> usize {
    11
}

fn default_pairs() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct H2Block {
    pub gamma: f64,
    pub eps0: f64,
    pub radius: f64,
    /// Outer radius of the annulus grid.
    pub r_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct H3Block {
    pub theta: f64,
    pub eta: f64,
    /// Growth constant; calibrated on the grid when absent.
    pub c: Option<f64>,
    pub m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Block {
    #[serde(default = "default_table_eps")]
    pub eps: Vec<f64>,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub rule: TTotalRule,
    /// Regimes as `{"m": .., "alphas": [..]}`; defaults to the standard four.
    pub regimes: Option<Vec<coopstab::measure::Table1Regime>>,
}

fn default_table_eps() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}

impl Default for Table1Block {
    fn default() -> Self {
        Table1Block {
            eps: default_table_eps(),
            step: default_step(),
            burn_in: default_burn_in(),
            delta: default_delta(),
            bins: default_bins(),
            rule: TTotalRule::default(),
            regimes: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_rejects_unknown() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"model":{"type":"ou","lambda":1.0},"simulate":{"x0":[1],"eps":0.1,"t":1}}"#)
                .unwrap();
        assert_eq!(c.simulate.unwrap().step, 1e-3);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sede":1}"#).is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sweep":{"eps":[0.1],"bogus":1}}"#).is_err());
    }
}
