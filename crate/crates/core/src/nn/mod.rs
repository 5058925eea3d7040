//! Autoregressive token policies that emit heuristic expressions, trained
//! by vanilla policy gradient.

mod attention;
mod checkpoint;
pub mod linalg;
mod lstm;
mod reward;
mod sampler;
mod search;
mod train;
mod transformer;
pub mod vocab;

#[cfg(test)]
mod tests;

pub use attention::{attention, attention_row, attention_weights, Matrix};
pub use checkpoint::PolicyCheckpoint;
pub use lstm::{Lstm, LstmShape};
pub use reward::{delta, episode_returns, shaped_reward, shaped_reward_of, timing_term, RewardConfig};
pub use sampler::{Grammar, Sample};
pub use search::{standalone_search, StandaloneConfig, StandaloneRun};
pub use train::{advantages, vpg_loss, Adam, StepReport, TrainState};
pub use transformer::{Transformer, TransformerShape};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::expr::{Token, MAX_DEPTH};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("token {index} (`{token}`) is not allowed at that position")]
    Disallowed { index: usize, token: String },
    #[error("sequence incomplete after {0} tokens")]
    Incomplete(usize),
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite reward in batch")]
    NonFiniteReward,
    #[error("non-finite gradient; update rejected")]
    NonFiniteGradient,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Inputs a network sees at one decoding step.
#[derive(Clone, Copy, Debug)]
pub struct StepInput {
    /// Previously emitted token, or BOS at the first step.
    pub prev: usize,
    /// Parent token of the slot being filled (BOS for the root).
    pub parent: usize,
    /// Left sibling of the slot, or EMPTY.
    pub sibling: usize,
    pub position: usize,
}

/// A differentiable next-token model over a flat parameter vector.
pub(crate) trait Net {
    type Trace;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn begin(&self) -> Self::Trace;
    /// Logits over emittable tokens for the next position.
    fn step(&self, trace: &mut Self::Trace, input: StepInput) -> Vec<f64>;
    /// Accumulates `d(sum_t dlogits_t . logits_t) / d(params)` into `grad`.
    fn backward(&self, trace: &Self::Trace, dlogits: &[Vec<f64>], grad: &mut [f64]);
}

pub(crate) fn uniform_init<R: Rng + ?Sized>(rng: &mut R, xs: &mut [f64], bound: f64) {
    for x in xs {
        *x = rng.random_range(-bound..=bound);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Lstm,
    Transformer,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Lstm => "lstm",
            PolicyKind::Transformer => "transformer",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lstm" => Ok(PolicyKind::Lstm),
            "transformer" => Ok(PolicyKind::Transformer),
            _ => Err(format!("unknown policy kind `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Longest sequence the policy may emit.
    pub max_len: usize,
    /// Deepest tree the policy may emit.
    pub max_depth: usize,
    /// LSTM context embedding width.
    pub embed: usize,
    /// LSTM hidden width, or Transformer model width.
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn: usize,
}

impl PolicyConfig {
    pub fn lstm() -> Self {
        Self { kind: PolicyKind::Lstm, max_len: 64, max_depth: MAX_DEPTH, embed: 16, hidden: 32, layers: 1, heads: 1, ffn: 0 }
    }

    pub fn transformer() -> Self {
        Self {
            kind: PolicyKind::Transformer,
            max_len: 64,
            max_depth: MAX_DEPTH,
            embed: 0,
            hidden: 32,
            layers: 2,
            heads: 2,
            ffn: 64,
        }
    }

    pub fn of_kind(kind: PolicyKind) -> Self {
        match kind {
            PolicyKind::Lstm => Self::lstm(),
            PolicyKind::Transformer => Self::transformer(),
        }
    }

    pub fn lstm_shape(&self) -> LstmShape {
        LstmShape { embed: self.embed, hidden: self.hidden }
    }

    pub fn transformer_shape(&self) -> TransformerShape {
        TransformerShape {
            layers: self.layers,
            d_model: self.hidden,
            heads: self.heads,
            ffn: self.ffn,
            max_positions: self.max_len,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PolicyNet {
    Lstm(Lstm),
    Transformer(Transformer),
}

macro_rules! with_net {
    ($self:expr, $n:ident => $body:expr) => {
        match $self {
            PolicyNet::Lstm($n) => $body,
            PolicyNet::Transformer($n) => $body,
        }
    };
}

impl PolicyNet {
    pub fn new(cfg: &PolicyConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match cfg.kind {
            PolicyKind::Lstm => PolicyNet::Lstm(Lstm::new(cfg.lstm_shape(), &mut rng)),
            PolicyKind::Transformer => PolicyNet::Transformer(Transformer::new(cfg.transformer_shape(), &mut rng)),
        }
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            PolicyNet::Lstm(_) => PolicyKind::Lstm,
            PolicyNet::Transformer(_) => PolicyKind::Transformer,
        }
    }

    pub fn params(&self) -> &[f64] {
        with_net!(self, n => n.params())
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        with_net!(self, n => n.params_mut())
    }

    /// Draws one complete expression under the grammar mask.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, max_len: usize, max_depth: usize) -> Sample {
        with_net!(self, n => sampler::sample(n, rng, max_len, max_depth))
    }

    /// Log-probability of `seq` under the same masking used for sampling.
    pub fn log_prob(&self, seq: &[Token], max_len: usize, max_depth: usize) -> Result<f64, NnError> {
        with_net!(self, n => sampler::log_prob(n, seq, max_len, max_depth))
    }

    /// Masked next-token distributions along `seq`.
    pub fn distributions(&self, seq: &[Token], max_len: usize, max_depth: usize) -> Result<Vec<Vec<f64>>, NnError> {
        with_net!(self, n => sampler::distributions(n, seq, max_len, max_depth))
    }

    /// Adds `weight * grad log p(seq)` to `grad` and returns `log p(seq)`.
    pub fn accumulate_grad(
        &self,
        seq: &[Token],
        weight: f64,
        grad: &mut [f64],
        max_len: usize,
        max_depth: usize,
    ) -> Result<f64, NnError> {
        with_net!(self, n => sampler::accumulate_grad(n, seq, weight, grad, max_len, max_depth))
    }
}
