//! JSON dump of a [`TrainState`] that restores bit-exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::{Adam, TrainState};
use super::{vocab, Lstm, NnError, PolicyConfig, PolicyKind, PolicyNet, Transformer};

const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub version: u32,
    pub vocabulary: Vec<String>,
    pub config: PolicyConfig,
    pub params: Vec<f64>,
    pub adam: Adam,
    pub baseline: f64,
    pub baseline_decay: f64,
    pub episode: u64,
    pub kappa: f64,
    pub standardize: bool,
}

impl PolicyCheckpoint {
    pub fn capture(state: &TrainState) -> Self {
        Self {
            version: VERSION,
            vocabulary: vocab::symbols(),
            config: state.config.clone(),
            params: state.policy.params().to_vec(),
            adam: state.adam.clone(),
            baseline: state.baseline,
            baseline_decay: state.baseline_decay,
            episode: state.episode,
            kappa: state.kappa,
            standardize: state.standardize,
        }
    }

    pub fn restore(&self) -> Result<TrainState, NnError> {
        let bad = |m: &str| NnError::Checkpoint(m.to_string());
        if self.version != VERSION {
            return Err(bad("unsupported version"));
        }
        if self.vocabulary != vocab::symbols() {
            return Err(bad("vocabulary differs from this build"));
        }
        let params = self.params.clone();
        let policy = match self.config.kind {
            PolicyKind::Lstm => Lstm::from_params(self.config.lstm_shape(), params).map(PolicyNet::Lstm),
            PolicyKind::Transformer => {
                Transformer::from_params(self.config.transformer_shape(), params).map(PolicyNet::Transformer)
            }
        }
        .ok_or_else(|| bad("parameter count does not match the layer shapes"))?;
        if self.adam.m.len() != self.params.len() || self.adam.v.len() != self.params.len() {
            return Err(bad("optimizer state does not match the parameters"));
        }
        Ok(TrainState {
            policy,
            config: self.config.clone(),
            adam: self.adam.clone(),
            baseline: self.baseline,
            baseline_decay: self.baseline_decay,
            episode: self.episode,
            kappa: self.kappa,
            standardize: self.standardize,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        serde_json::from_str(text).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NnError> {
        let text = std::fs::read_to_string(path).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        Self::from_json(&text)
    }
}
