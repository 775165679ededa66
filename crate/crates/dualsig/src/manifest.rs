//! Reproducibility record written next to every command's outputs.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT: &str = "dualsig-manifest/1";
pub const FILE_NAME: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub unit_cost: f64,
    pub verification_rate: [f64; 3],
    pub error_cost: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format: String,
    pub command: String,
    pub tool_version: String,
    /// Unix seconds; `SOURCE_DATE_EPOCH` overrides the clock.
    pub timestamp: u64,
    pub seed: u64,
    pub inputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,
    pub outputs: Vec<String>,
    /// Set when this run was replayed from another manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replayed_from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostSection>,
    /// The full, path-absolute option set of the command, enough to rerun it.
    pub invocation: toml::Table,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, invocation: toml::Table) -> Self {
        Self {
            format: FORMAT.into(),
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            timestamp: timestamp(),
            seed,
            inputs: Vec::new(),
            weights: None,
            outputs: Vec::new(),
            replayed_from: None,
            cost: None,
            invocation,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let m: RunManifest = toml::from_str(text).map_err(|e| Error::schema(path, e.to_string()))?;
        if m.format != FORMAT {
            return Err(Error::schema(path, format!("unsupported format `{}`, expected `{FORMAT}`", m.format)));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }
}

fn timestamp() -> u64 {
    if let Some(epoch) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        return epoch;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
