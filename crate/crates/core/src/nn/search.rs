//! Policy-gradient search without GP.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::reward::{episode_returns, RewardConfig};
use super::train::TrainState;
use super::{NnError, PolicyConfig};
use crate::expr::{ExprTree, Token};
use crate::gp::{FitnessEvaluator, GenerationStats, Individual, Origin};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandaloneConfig {
    pub policy: PolicyConfig,
    /// Number of sampled heuristics to evaluate.
    pub budget: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub reward: RewardConfig,
    pub standardize: bool,
}

impl StandaloneConfig {
    pub fn new(policy: PolicyConfig, budget: usize, seed: u64) -> Self {
        Self { policy, budget, batch_size: 64, seed, reward: RewardConfig::default(), standardize: true }
    }
}

#[derive(Clone, Debug)]
pub struct StandaloneRun {
    pub best: Individual,
    /// One row per sampled batch; `best` is the best so far.
    pub history: Vec<GenerationStats>,
    pub state: TrainState,
}

/// Sample a batch, score it by simulation, take one policy-gradient step,
/// repeat until `budget` heuristics have been evaluated.
pub fn standalone_search(cfg: &StandaloneConfig, evaluator: &mut FitnessEvaluator) -> Result<StandaloneRun, NnError> {
    assert!(cfg.budget >= 1 && cfg.batch_size >= 1, "budget and batch size must be positive");
    let mut state = TrainState::new(cfg.policy.clone(), cfg.seed);
    state.standardize = cfg.standardize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut best: Option<Individual> = None;
    let mut history = Vec::new();
    let mut done = 0;
    while done < cfg.budget {
        let n = cfg.batch_size.min(cfg.budget - done);
        let seqs: Vec<Vec<Token>> =
            (0..n).map(|_| state.policy.sample(&mut rng, cfg.policy.max_len, cfg.policy.max_depth).tokens).collect();
        let trees: Vec<ExprTree> = seqs.iter().map(|s| ExprTree::from_polish(s).expect("valid sample")).collect();
        let refs: Vec<&ExprTree> = trees.iter().collect();
        let fits = evaluator.evaluate(&refs);
        for (t, &f) in trees.iter().zip(&fits) {
            if best.as_ref().is_none_or(|b| f > b.score()) {
                best = Some(Individual { tree: t.clone(), fitness: Some(f), origin: Origin::NnSeeded });
            }
        }
        let returns = episode_returns(&refs, &fits, evaluator.instances(), &cfg.reward, state.delta());
        let batch: Vec<(Vec<Token>, f64)> =
            seqs.into_iter().zip(returns).filter(|(_, r)| r.is_finite()).collect();
        if !batch.is_empty() {
            state.train_step(&batch)?;
        }
        let finite: Vec<f64> = fits.iter().copied().filter(|f| f.is_finite()).collect();
        let b = best.as_ref().expect("at least one sample");
        let mut sorted = fits.clone();
        sorted.sort_by(f64::total_cmp);
        history.push(GenerationStats {
            generation: history.len(),
            best: b.score(),
            mean: if finite.is_empty() { f64::NEG_INFINITY } else { finite.iter().sum::<f64>() / finite.len() as f64 },
            median: sorted[sorted.len() / 2],
            best_tokens: b.tree.token_count(),
        });
        done += n;
    }
    Ok(StandaloneRun { best: best.expect("budget >= 1"), history, state })
}
