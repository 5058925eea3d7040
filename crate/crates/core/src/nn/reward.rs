//! Shaped reward: idle-gap timing term minus a ranking-agreement term.

use serde::{Deserialize, Serialize};

use crate::expr::ExprTree;
use crate::heuristics::{rank_by_score, rank_candidates, rank_covariance, ManualHeuristic};
use crate::sim::{run_simulation, SimError, SimResult, TerminalInstance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Weight of the shaped reward in the training return.
    pub lambda: f64,
    pub kappa: f64,
    /// `+1` subtracts the covariance term, `-1` adds it.
    pub covariance_sign: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { lambda: 0.0, kappa: 10.0, covariance_sign: 1.0 }
    }
}

/// `kappa / en`.
pub fn delta(kappa: f64, episode: u64) -> f64 {
    kappa / episode.max(1) as f64
}

/// Sum over consecutive tasks of each truck of `e_prev - s_next`.
pub fn timing_term(result: &SimResult, instance: &TerminalInstance) -> f64 {
    let mut total = 0.0;
    for chain in result.truck_chains(instance.trucks()) {
        for w in chain.windows(2) {
            let prev = result.record(w[0]).expect("chained task has a record");
            let next = result.record(w[1]).expect("chained task has a record");
            total += prev.end - next.start;
        }
    }
    total
}

/// Timing term minus `sign * delta * sum cov(O_r, O_m)` over the recorded
/// decisions, where `O_r` ranks candidates by the heuristic's own scores
/// and `O_m` by the manual rule.
pub fn shaped_reward(
    result: &SimResult,
    instance: &TerminalInstance,
    manual: &ManualHeuristic,
    delta: f64,
    sign: f64,
) -> f64 {
    let mut cov = 0.0;
    for d in &result.decisions {
        if d.candidates.len() < 2 {
            continue;
        }
        let o_r = rank_by_score(&d.candidates, &d.scores);
        let ctx = crate::sim::DecisionContext { index: d.index, time: d.time, truck: d.truck, seed: instance.seed() };
        let o_m = rank_candidates(manual, &ctx, &d.candidates, &d.features);
        cov += rank_covariance(&o_r, &o_m);
    }
    timing_term(result, instance) - sign * delta * cov
}

/// Simulates `tree` with the decision log on and returns its shaped reward.
pub fn shaped_reward_of(
    tree: &ExprTree,
    instance: &TerminalInstance,
    delta: f64,
    sign: f64,
) -> Result<f64, SimError> {
    let result = run_simulation(instance, tree, instance.seed())?;
    Ok(shaped_reward(&result, instance, &ManualHeuristic::for_instance(instance), delta, sign))
}

/// Training returns `fitness + lambda * shaped`, the shaped part averaged
/// over `instances`. With `lambda == 0` no extra simulation is run.
pub fn episode_returns(
    trees: &[&ExprTree],
    fitness: &[f64],
    instances: &[TerminalInstance],
    cfg: &RewardConfig,
    delta: f64,
) -> Vec<f64> {
    if cfg.lambda == 0.0 {
        return fitness.to_vec();
    }
    trees
        .iter()
        .zip(fitness)
        .map(|(t, &f)| {
            let mut shaped = 0.0;
            for inst in instances {
                match shaped_reward_of(t, inst, delta, cfg.covariance_sign) {
                    Ok(s) => shaped += s,
                    Err(_) => return f64::NEG_INFINITY,
                }
            }
            f + cfg.lambda * shaped / instances.len() as f64
        })
        .collect()
}
