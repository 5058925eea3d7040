//! The seeding loop: the policy proposes heuristics, GP evolves them, and
//! the evolved population trains the policy.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::expr::{ExprTree, Token};
use crate::gp::{evolve, ranked, FitnessEvaluator, GpConfig, GpError, GpState, Individual, Origin};
use crate::nn::{episode_returns, NnError, PolicyConfig, PolicyKind, RewardConfig, TrainState};

#[derive(Debug, thiserror::Error)]
pub enum HybridError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("history: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub gp: GpConfig,
    pub policy: PolicyConfig,
    /// GP generations per cycle (K).
    pub cycle_generations: usize,
    /// Policy samples per cycle (N).
    pub seeds_per_cycle: usize,
    pub total_generations: usize,
    /// Inject policy samples into the GP population.
    pub seeding_enabled: bool,
    /// Update the policy on each cycle's merged population.
    pub training_enabled: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub standardize: bool,
    pub reward: RewardConfig,
    pub rng_seed: u64,
}

impl HybridConfig {
    /// Full-size settings: K = 20, M = 1024, N = 512, 500 generations.
    pub fn full_scale(kind: PolicyKind) -> Self {
        Self {
            gp: GpConfig::default(),
            policy: PolicyConfig::of_kind(kind),
            cycle_generations: 20,
            seeds_per_cycle: 512,
            total_generations: 500,
            seeding_enabled: true,
            training_enabled: true,
            epochs: 4,
            batch_size: 64,
            standardize: true,
            reward: RewardConfig::default(),
            rng_seed: 0,
        }
    }

    /// Laptop-size settings: K = 5, M = 64, N = 32, 30 generations.
    pub fn desk(kind: PolicyKind) -> Self {
        Self {
            gp: GpConfig::desk(),
            cycle_generations: 5,
            seeds_per_cycle: 32,
            total_generations: 30,
            ..Self::full_scale(kind)
        }
    }

    pub fn cycles(&self) -> usize {
        self.total_generations / self.cycle_generations
    }

    pub fn validate(&self) -> Result<(), HybridError> {
        self.gp.validate()?;
        let err = |m: &str| Err(HybridError::Config(m.to_string()));
        if self.cycle_generations == 0 || self.total_generations % self.cycle_generations != 0 {
            return err("total generations must be a positive multiple of the cycle length");
        }
        if self.seeds_per_cycle > self.gp.population_size {
            return err("more seeds per cycle than population slots");
        }
        if self.policy.max_depth > self.gp.max_depth {
            return err("policy may emit trees deeper than GP allows");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return err("epochs and batch size must be positive");
        }
        Ok(())
    }

    /// Fitness lookups the run must make, counting memoized hits.
    pub fn predicted_lookups(&self) -> usize {
        let (m, n, c) = (self.gp.population_size, self.seeds_per_cycle, self.cycles());
        let bred = c * self.cycle_generations * (m - self.gp.elitism);
        let samples = match (self.seeding_enabled, self.training_enabled) {
            (true, _) => c.saturating_sub(1) * n,
            (false, true) => c * n,
            (false, false) => 0,
        };
        m + bred + samples
    }
}

/// One generation of a hybrid run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub token_count_best: usize,
    pub delta: f64,
    pub baseline: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub predicted_lookups: usize,
    pub lookups: usize,
    /// Distinct heuristics simulated.
    pub evaluations: usize,
    /// Simulator runs: evaluations times instances.
    pub simulations: usize,
}

#[derive(Clone, Debug)]
pub struct HybridRun {
    /// Fittest heuristic seen anywhere in the run.
    pub best: Individual,
    pub history: Vec<HybridStats>,
    pub budget: BudgetReport,
    pub state: GpState,
    pub policy: TrainState,
    pub rejected_seeds: usize,
}

fn stats_row(state: &GpState, policy: &TrainState) -> HybridStats {
    let s = state.stats();
    HybridStats {
        generation: s.generation,
        best: s.best,
        mean: s.mean,
        token_count_best: s.best_tokens,
        delta: policy.delta(),
        baseline: policy.baseline,
    }
}

fn better(a: &Individual, best: &Option<Individual>) -> bool {
    best.as_ref().is_none_or(|b| a.score() > b.score())
}

/// Next cycle's population: the seeds followed by the fittest
/// `size - seeds.len()` survivors.
pub fn reseed(population: &[Individual], seeds: &[ExprTree], size: usize) -> Vec<Individual> {
    let order = ranked(population);
    let mut next: Vec<Individual> = seeds.iter().map(|t| Individual::new(t.clone(), Origin::NnSeeded)).collect();
    next.extend(order[..size - seeds.len()].iter().map(|&i| population[i].clone()));
    next
}

/// Runs `cfg.cycles()` cycles of sample, seed, evolve, train.
pub fn run_hybrid(cfg: &HybridConfig, evaluator: &mut FitnessEvaluator) -> Result<HybridRun, HybridError> {
    cfg.validate()?;
    let (start_lookups, start_evals) = (evaluator.lookups(), evaluator.evaluations());
    let mut policy = TrainState::new(cfg.policy.clone(), cfg.rng_seed ^ 0x5EED_0F_B011C7);
    policy.standardize = cfg.standardize;
    let mut policy_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    policy_rng.set_stream(1);
    let (m, n) = (cfg.gp.population_size, cfg.seeds_per_cycle);
    let sampling = cfg.seeding_enabled || cfg.training_enabled;

    let mut state: Option<GpState> = None;
    let mut history = Vec::new();
    let mut best: Option<Individual> = None;
    let mut rejected_seeds = 0;

    for _ in 0..cfg.cycles() {
        let samples: Vec<Vec<Token>> = if sampling {
            (0..n).map(|_| policy.policy.sample(&mut policy_rng, cfg.policy.max_len, cfg.policy.max_depth).tokens).collect()
        } else {
            Vec::new()
        };
        let sample_trees: Vec<ExprTree> =
            samples.iter().map(|s| ExprTree::from_polish(s).expect("sampler emits valid sequences")).collect();

        let st = match state.as_mut() {
            None => {
                let seeds: &[ExprTree] = if cfg.seeding_enabled { &sample_trees } else { &[] };
                let (s, rejected) = GpState::new(&cfg.gp, seeds, cfg.rng_seed, evaluator)?;
                rejected_seeds += rejected.len();
                history.push(stats_row(&s, &policy));
                state.insert(s)
            }
            Some(s) => {
                if cfg.seeding_enabled {
                    s.population = reseed(&s.population, &sample_trees, m);
                    evaluator.evaluate_population(&mut s.population);
                }
                s
            }
        };

        let sample_fitness: Vec<f64> = if cfg.seeding_enabled {
            sample_trees.iter().map(|t| evaluator.cached(t).expect("seed was evaluated")).collect()
        } else if cfg.training_enabled {
            evaluator.evaluate(&sample_trees.iter().collect::<Vec<_>>())
        } else {
            Vec::new()
        };
        for (t, &f) in sample_trees.iter().zip(&sample_fitness) {
            let ind = Individual { tree: t.clone(), fitness: Some(f), origin: Origin::NnSeeded };
            if better(&ind, &best) {
                best = Some(ind);
            }
        }
        if better(st.best(), &best) {
            best = Some(st.best().clone());
        }

        let rows = evolve(st, &cfg.gp, cfg.cycle_generations, evaluator)?;
        if better(st.best(), &best) {
            best = Some(st.best().clone());
        }

        if cfg.training_enabled {
            train_cycle(cfg, &mut policy, &mut policy_rng, st, &sample_trees, &sample_fitness, evaluator)?;
        }
        for r in rows {
            history.push(HybridStats {
                generation: r.generation,
                best: r.best,
                mean: r.mean,
                token_count_best: r.best_tokens,
                delta: policy.delta(),
                baseline: policy.baseline,
            });
        }
    }

    let budget = BudgetReport {
        predicted_lookups: cfg.predicted_lookups(),
        lookups: evaluator.lookups() - start_lookups,
        evaluations: evaluator.evaluations() - start_evals,
        simulations: (evaluator.evaluations() - start_evals) * evaluator.instances().len(),
    };
    assert_eq!(budget.lookups, budget.predicted_lookups, "fitness budget accounting");
    assert!(budget.evaluations <= budget.lookups);
    Ok(HybridRun {
        best: best.expect("at least one cycle"),
        history,
        budget,
        state: state.expect("at least one cycle"),
        policy,
        rejected_seeds,
    })
}

/// Policy-gradient epochs over GP's population plus this cycle's samples.
/// Individuals the policy cannot emit (too long or too deep) are skipped.
fn train_cycle(
    cfg: &HybridConfig,
    policy: &mut TrainState,
    rng: &mut ChaCha8Rng,
    state: &GpState,
    samples: &[ExprTree],
    sample_fitness: &[f64],
    evaluator: &FitnessEvaluator,
) -> Result<(), HybridError> {
    let mut trees: Vec<&ExprTree> = Vec::new();
    let mut fits: Vec<f64> = Vec::new();
    let items = state.population.iter().map(|i| (&i.tree, i.score())).chain(samples.iter().zip(sample_fitness.iter().copied()));
    for (t, f) in items {
        if f.is_finite() && t.token_count() <= cfg.policy.max_len && t.depth() <= cfg.policy.max_depth {
            trees.push(t);
            fits.push(f);
        }
    }
    let returns = episode_returns(&trees, &fits, evaluator.instances(), &cfg.reward, policy.delta());
    let mut data: Vec<(Vec<Token>, f64)> =
        trees.iter().zip(returns).filter(|(_, r)| r.is_finite()).map(|(t, r)| (t.to_polish(), r)).collect();
    for _ in 0..cfg.epochs {
        data.shuffle(rng);
        for chunk in data.chunks(cfg.batch_size) {
            policy.train_step(chunk)?;
        }
    }
    Ok(())
}

pub fn write_history<W: Write>(out: W, rows: &[HybridStats]) -> Result<(), HybridError> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["generation", "best", "mean", "token_count_best", "delta", "baseline"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_history<R: Read>(input: R) -> Result<Vec<HybridStats>, HybridError> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(HybridError::from)).collect()
}

/// Mean and spread of final-best token counts for one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenSummary {
    pub method: String,
    pub runs: usize,
    pub mean_tokens: f64,
    pub sd_tokens: f64,
}

/// Summarizes token counts of each method's final best heuristics.
pub fn report_token_counts<'a>(runs: impl IntoIterator<Item = (&'a str, &'a ExprTree)>) -> Vec<TokenSummary> {
    let mut by_method: Vec<(String, Vec<f64>)> = Vec::new();
    for (method, tree) in runs {
        let n = tree.token_count() as f64;
        match by_method.iter_mut().find(|(m, _)| m == method) {
            Some((_, v)) => v.push(n),
            None => by_method.push((method.to_string(), vec![n])),
        }
    }
    by_method
        .into_iter()
        .map(|(method, v)| {
            let k = v.len() as f64;
            let mean = v.iter().sum::<f64>() / k;
            let sd = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / k).sqrt();
            TokenSummary { method, runs: v.len(), mean_tokens: mean, sd_tokens: sd }
        })
        .collect()
}
