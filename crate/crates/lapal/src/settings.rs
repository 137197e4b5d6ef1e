//! The resolved configuration of a command: preset defaults, overridden by a
//! TOML file, overridden by command-line flags.

use std::path::Path;

use lapal_core::config::{CvaeConfig, Preset, RunConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub preset: Preset,
    pub out_dir: String,
    pub seeds: Vec<u64>,
    /// Demonstrations per corpus.
    pub demo_episodes: usize,
    pub demo_seed: u64,
    pub codec_seed: u64,
    pub run: RunConfig,
    pub cvae: CvaeConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

impl TrainConfig {
    pub fn preset(preset: Preset) -> Self {
        let run = RunConfig { sac: lapal_core::config::SacConfig::preset(preset), ..RunConfig::default() };
        let run = RunConfig { disc: lapal_core::config::DiscConfig::preset(preset), ..run };
        TrainConfig {
            preset,
            out_dir: "runs".into(),
            seeds: vec![0, 1, 2],
            demo_episodes: 64,
            demo_seed: 0,
            codec_seed: 0,
            run,
            cvae: CvaeConfig::preset(preset),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    /// Parses a config file on top of the defaults of the preset it names
    /// (or `fallback` when it names none).
    pub fn from_toml(text: &str, fallback: Preset) -> Result<Self, String> {
        let file: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
        let preset = match file.get("preset") {
            Some(v) => Preset::deserialize(v.clone()).map_err(|e| e.to_string())?,
            None => fallback,
        };
        let mut base = toml::Table::try_from(Self::preset(preset)).map_err(|e| e.to_string())?;
        merge(&mut base, file);
        TrainConfig::deserialize(toml::Value::Table(base)).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path, fallback: Preset) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text, fallback).map_err(|e| CliError::format(path, e))
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
