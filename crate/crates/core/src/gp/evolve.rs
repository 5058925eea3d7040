use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fitness::FitnessEvaluator;
use super::init::init_population;
use super::variation::vary;
use super::{best_index, ranked, GpConfig, GpError, Individual};
use crate::expr::ExprTree;

/// Summary of one generation's population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    /// Mean over individuals with finite fitness.
    pub mean: f64,
    pub median: f64,
    pub best_tokens: usize,
}

pub fn generation_stats(generation: usize, population: &[Individual]) -> GenerationStats {
    let b = best_index(population).expect("nonempty population");
    let mut fits: Vec<f64> = population.iter().map(Individual::score).collect();
    fits.sort_by(f64::total_cmp);
    let n = fits.len();
    let median = if n % 2 == 1 { fits[n / 2] } else { (fits[n / 2 - 1] + fits[n / 2]) / 2.0 };
    let finite: Vec<f64> = fits.iter().copied().filter(|f| f.is_finite()).collect();
    let mean = if finite.is_empty() { f64::NEG_INFINITY } else { finite.iter().sum::<f64>() / finite.len() as f64 };
    GenerationStats {
        generation,
        best: population[b].score(),
        mean,
        median,
        best_tokens: population[b].tree.token_count(),
    }
}

/// An evolving population together with its random stream.
#[derive(Clone, Debug)]
pub struct GpState {
    pub population: Vec<Individual>,
    pub generation: usize,
    pub rng: ChaCha8Rng,
}

impl GpState {
    /// Initializes and evaluates a population. Returns the state and the
    /// positions of seeds rejected by the depth bound.
    pub fn new(
        cfg: &GpConfig,
        seeds: &[ExprTree],
        seed: u64,
        evaluator: &mut FitnessEvaluator,
    ) -> Result<(Self, Vec<usize>), GpError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = init_population(cfg, seeds, &mut rng);
        let mut state = GpState { population: init.population, generation: 0, rng };
        evaluator.evaluate_population(&mut state.population);
        Ok((state, init.rejected_seeds))
    }

    pub fn best(&self) -> &Individual {
        &self.population[best_index(&self.population).expect("nonempty population")]
    }

    pub fn stats(&self) -> GenerationStats {
        generation_stats(self.generation, &self.population)
    }
}

/// Runs `k` generations: elites are copied unchanged, the rest of the
/// population is bred by tournament selection and variation. Returns one
/// stats row per generation.
pub fn evolve(
    state: &mut GpState,
    cfg: &GpConfig,
    k: usize,
    evaluator: &mut FitnessEvaluator,
) -> Result<Vec<GenerationStats>, GpError> {
    if state.population.is_empty() {
        return Err(GpError::EmptyPopulation);
    }
    evaluator.evaluate_population(&mut state.population);
    let mut history = Vec::with_capacity(k);
    for _ in 0..k {
        let order = ranked(&state.population);
        let mut next: Vec<Individual> = order[..cfg.elitism].iter().map(|&i| state.population[i].clone()).collect();
        let size = state.population.len();
        while next.len() < size {
            next.push(vary(&mut state.rng, &state.population, cfg));
        }
        evaluator.evaluate_population(&mut next[cfg.elitism..]);
        state.population = next;
        state.generation += 1;
        history.push(state.stats());
    }
    Ok(history)
}

/// Result of a complete GP run.
#[derive(Clone, Debug)]
pub struct GpRun {
    pub best: Individual,
    /// Rows for generation 0 through the last generation.
    pub history: Vec<GenerationStats>,
    pub state: GpState,
}

/// Plain GP from a random population for `cfg.generations` generations.
pub fn run_gp(cfg: &GpConfig, seed: u64, evaluator: &mut FitnessEvaluator) -> Result<GpRun, GpError> {
    let (mut state, _) = GpState::new(cfg, &[], seed, evaluator)?;
    let mut history = vec![state.stats()];
    history.extend(evolve(&mut state, cfg, cfg.generations, evaluator)?);
    Ok(GpRun { best: state.best().clone(), history, state })
}

/// Plain GP that keeps evolving until the evaluator has simulated at least
/// `min_evaluations` distinct heuristics (or `max_generations` is hit).
pub fn run_gp_budget(
    cfg: &GpConfig,
    seed: u64,
    evaluator: &mut FitnessEvaluator,
    min_evaluations: usize,
    max_generations: usize,
) -> Result<GpRun, GpError> {
    let start = evaluator.evaluations();
    let (mut state, _) = GpState::new(cfg, &[], seed, evaluator)?;
    let mut history = vec![state.stats()];
    while evaluator.evaluations() - start < min_evaluations && state.generation < max_generations {
        history.extend(evolve(&mut state, cfg, 1, evaluator)?);
    }
    Ok(GpRun { best: state.best().clone(), history, state })
}
