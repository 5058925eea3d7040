//! Vanilla policy gradient with an EWMA baseline and Adam.

use serde::{Deserialize, Serialize};

use super::{NnError, PolicyConfig, PolicyNet};
use crate::expr::Token;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// One descent step on `params` along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Advantages `R - b`, optionally standardized within the batch.
pub fn advantages(rewards: &[f64], baseline: f64, standardize: bool) -> Vec<f64> {
    let mut a: Vec<f64> = rewards.iter().map(|r| r - baseline).collect();
    if standardize && a.len() >= 2 {
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let sd = (a.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
        for x in &mut a {
            *x -= mean;
            if sd > 0.0 {
                *x /= sd;
            }
        }
    }
    a
}

/// Surrogate loss `-(1/|T|) sum_i A_i log p(seq_i)` and its gradient.
pub fn vpg_loss(
    policy: &PolicyNet,
    cfg: &PolicyConfig,
    batch: &[(Vec<Token>, f64)],
    baseline: f64,
    standardize: bool,
) -> Result<(f64, Vec<f64>), NnError> {
    if batch.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    if batch.iter().any(|(_, r)| !r.is_finite()) {
        return Err(NnError::NonFiniteReward);
    }
    let rewards: Vec<f64> = batch.iter().map(|(_, r)| *r).collect();
    let adv = advantages(&rewards, baseline, standardize);
    let n = batch.len() as f64;
    let mut grad = vec![0.0; policy.params().len()];
    let mut loss = 0.0;
    for ((seq, _), a) in batch.iter().zip(adv) {
        let lp = policy.accumulate_grad(seq, -a / n, &mut grad, cfg.max_len, cfg.max_depth)?;
        loss -= a * lp / n;
    }
    Ok((loss, grad))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub loss: f64,
    pub mean_reward: f64,
    /// Baseline used for this step's advantages.
    pub baseline: f64,
    pub grad_norm: f64,
}

/// Policy, optimizer and reward bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub policy: PolicyNet,
    pub config: PolicyConfig,
    pub adam: Adam,
    /// EWMA of batch mean rewards.
    pub baseline: f64,
    pub baseline_decay: f64,
    /// 1-based index of the next training episode.
    pub episode: u64,
    pub kappa: f64,
    pub standardize: bool,
}

impl TrainState {
    pub fn new(config: PolicyConfig, seed: u64) -> Self {
        let policy = PolicyNet::new(&config, seed);
        let adam = Adam::new(policy.params().len());
        Self { policy, config, adam, baseline: 0.0, baseline_decay: 0.9, episode: 1, kappa: 10.0, standardize: false }
    }

    /// Current shaped-reward weight `kappa / en`.
    pub fn delta(&self) -> f64 {
        super::reward::delta(self.kappa, self.episode)
    }

    /// One update on `batch`; the state is untouched on error.
    pub fn train_step(&mut self, batch: &[(Vec<Token>, f64)]) -> Result<StepReport, NnError> {
        let (loss, grad) = vpg_loss(&self.policy, &self.config, batch, self.baseline, self.standardize)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(NnError::NonFiniteGradient);
        }
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        self.adam.step(self.policy.params_mut(), &grad);
        let mean_reward = batch.iter().map(|(_, r)| r).sum::<f64>() / batch.len() as f64;
        let baseline = self.baseline;
        self.baseline = self.baseline_decay * self.baseline + (1.0 - self.baseline_decay) * mean_reward;
        self.episode += 1;
        Ok(StepReport { loss, mean_reward, baseline, grad_norm })
    }
}
