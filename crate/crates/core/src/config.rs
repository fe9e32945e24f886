//! Run configuration files and the bundled presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::OptimizerConfig;
use crate::phase_ref::DriftConfig;
use crate::rates::{LinkBudget, ProtocolConstants};
use crate::sim::{SimConfig, DEFAULT_CACHE_RESOLUTION, DEFAULT_ROUNDS_PER_INTERVAL};
use crate::source::{split_intensity, SourceModel};

pub const PRESETS: [(&str, &str); 3] = [
    ("trial_100km", include_str!("../data/presets/trial_100km.toml")),
    ("trial_200km", include_str!("../data/presets/trial_200km.toml")),
    ("trial_300km", include_str!("../data/presets/trial_300km.toml")),
];

/// The source is given either by its measured total intensity or by its
/// emission efficiency; `g2` fixes the leaked share in both cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity_total: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_emit: Option<f64>,
    pub g2: f64,
}

impl SourceSpec {
    pub fn model(&self) -> Result<SourceModel> {
        match (self.intensity_total, self.t_emit) {
            (Some(i), None) => split_intensity(i, self.g2),
            (None, Some(t)) => SourceModel::from_emission(t, self.g2),
            _ => Err(Error::Config("source needs exactly one of intensity_total, t_emit".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub n_rounds: u64,
    pub cache_resolution: u32,
    pub rounds_per_interval: u64,
    pub retain_records: bool,
    /// Use the multinomial sampler instead of visiting rounds.
    pub aggregate: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            n_rounds: 10_000_000,
            cache_resolution: DEFAULT_CACHE_RESOLUTION,
            rounds_per_interval: DEFAULT_ROUNDS_PER_INTERVAL,
            retain_records: false,
            aggregate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub links: LinkBudget,
    pub source: SourceSpec,
    pub protocol: ProtocolConstants,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub drift: Option<DriftConfig>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

fn default_seed() -> u64 {
    1
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn preset(name: &str) -> Option<Self> {
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::from_toml(text).expect("bundled presets are valid"))
    }

    /// A preset name or a path to a TOML file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some(cfg) = Self::preset(name_or_path) {
            return Ok(cfg);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            return Err(Error::Config(format!(
                "`{name_or_path}` is neither a preset ({}) nor a file",
                names.join(", ")
            )));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.links.validate().map_err(wrap)?;
        self.protocol.validate().map_err(wrap)?;
        self.source.model().map_err(wrap)?;
        if self.sim.n_rounds == 0 {
            return Err(Error::Config("sim.n_rounds must be at least 1".into()));
        }
        if self.sim.cache_resolution < 64 {
            return Err(Error::Config("sim.cache_resolution must be at least 64".into()));
        }
        if self.sim.rounds_per_interval == 0 {
            return Err(Error::Config("sim.rounds_per_interval must be positive".into()));
        }
        if let Some(d) = &self.drift {
            d.validate().map_err(wrap)?;
        }
        Ok(())
    }

    pub fn source_model(&self) -> Result<SourceModel> {
        self.source.model()
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let mut s = SimConfig::new(self.links, self.source_model()?, self.protocol, self.sim.n_rounds, self.seed);
        s.drift = self.drift;
        s.cache_resolution = self.sim.cache_resolution;
        s.rounds_per_interval = self.sim.rounds_per_interval;
        s.retain_records = self.sim.retain_records;
        Ok(s)
    }
}
