//! Run configuration file (TOML).
//!
//! Every section is optional and falls back to defaults; unknown keys are
//! rejected by name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::align::FitDomain;
use crate::anomaly::DetectorConfig;
use crate::error::{Error, Result};
use crate::sim::{ErrorPolicy, SimConfig};
use crate::types::SensorSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationParams {
    pub region_count_range: [usize; 2],
    pub region_area_range: [f64; 2],
    pub error_policy: ErrorPolicy,
    pub error_region_probability: f64,
    pub jitter: f64,
}

impl Default for SimulationParams {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            region_count_range: d.region_count_range,
            region_area_range: d.region_area_range,
            error_policy: d.error_policy,
            error_region_probability: d.error_region_probability,
            jitter: d.jitter,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompletionParams {
    pub domain: FitDomain,
    pub robust: bool,
    pub residuals: bool,
    pub detect: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gt: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub sensor: SensorSpec,
    pub simulation: SimulationParams,
    pub detector: DetectorConfig,
    pub completion: CompletionParams,
    pub paths: Paths,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        cfg.sim_config(cfg.seed).validate()?;
        cfg.detector.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(e).at_path(path))?;
        Self::parse(&text).map_err(|e| e.at_path(path))
    }

    pub fn sim_config(&self, seed: u64) -> SimConfig {
        let s = &self.simulation;
        SimConfig {
            spec: self.sensor.clone(),
            seed,
            region_count_range: s.region_count_range,
            region_area_range: s.region_area_range,
            error_policy: s.error_policy,
            error_region_probability: s.error_region_probability,
            jitter: s.jitter,
        }
    }
}
