//! Record of what an experiment ran on, written next to its results.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::plan::ExperimentPlan;
use super::run::{Block, InstanceEntry};
use super::ExperimentError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub name: String,
    pub block: Block,
    pub path: Option<String>,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    /// The plan as TOML.
    pub plan: String,
    pub desk: bool,
    pub seeds: Vec<u64>,
    pub instances: Vec<InstanceRecord>,
}

impl RunManifest {
    pub fn new(plan: &ExperimentPlan, desk: bool, instances: &[InstanceEntry]) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").into(),
            plan: plan.to_toml(),
            desk,
            seeds: plan.seeds(),
            instances: instances
                .iter()
                .map(|e| InstanceRecord {
                    name: e.name.clone(),
                    block: e.block,
                    path: e.path.as_ref().map(|p| p.display().to_string()),
                    sha256: e.sha256.clone(),
                })
                .collect(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ExperimentError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
