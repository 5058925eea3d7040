//! Tree-based genetic programming over dispatch expressions.

mod checkpoint;
mod evolve;
mod fitness;
mod init;
mod log;
mod variation;

pub use checkpoint::Checkpoint;
pub use evolve::{evolve, generation_stats, run_gp, run_gp_budget, GenerationStats, GpRun, GpState};
pub use fitness::FitnessEvaluator;
pub use init::{init_population, random_tree, ramped_half_and_half, InitMethod, SeededPopulation};
pub use log::{read_log, write_log};
pub use variation::{
    choose_variation, point_of_variation, subtree_crossover, subtree_mutation, subtree_mutation_at, vary, Variation,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::expr::{ExprTree, MAX_DEPTH};

#[derive(Debug, thiserror::Error)]
pub enum GpError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("population is empty")]
    EmptyPopulation,
    #[error("no instances to evaluate on")]
    NoInstances,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("log: {0}")]
    Log(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub population_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub reproduction_rate: f64,
    pub tournament_size: usize,
    pub max_depth: usize,
    /// Inclusive depth range for ramped half-and-half initialization.
    pub init_depth: (usize, usize),
    /// Maximum depth of subtrees grown by mutation.
    pub mutation_depth: usize,
    pub elitism: usize,
    pub generations: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            population_size: 1024,
            crossover_rate: 0.6,
            mutation_rate: 0.3,
            reproduction_rate: 0.1,
            tournament_size: 7,
            max_depth: MAX_DEPTH,
            init_depth: (2, 6),
            mutation_depth: 4,
            elitism: 1,
            generations: 500,
        }
    }
}

impl GpConfig {
    /// Small configuration for laptop-scale runs.
    pub fn desk() -> Self {
        Self { population_size: 64, tournament_size: 3, generations: 30, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), GpError> {
        let err = |m: &str| Err(GpError::Config(m.to_string()));
        let rates = [self.crossover_rate, self.mutation_rate, self.reproduction_rate];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return err("operator rates must lie in [0, 1]");
        }
        if (rates.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return err("operator rates must sum to 1");
        }
        if self.population_size < 2 {
            return err("population size must be at least 2");
        }
        if self.tournament_size == 0 {
            return err("tournament size must be positive");
        }
        if self.elitism >= self.population_size {
            return err("elitism must be smaller than the population");
        }
        let (lo, hi) = self.init_depth;
        if lo > hi || hi > self.max_depth || self.max_depth > MAX_DEPTH {
            return err("need init depth min <= max <= max_depth <= 17");
        }
        if self.mutation_depth > self.max_depth {
            return err("mutation depth exceeds max depth");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Random,
    Crossover,
    Mutation,
    Reproduction,
    NnSeeded,
}

impl Origin {
    pub const ALL: [Origin; 5] =
        [Origin::Random, Origin::Crossover, Origin::Mutation, Origin::Reproduction, Origin::NnSeeded];

    pub fn name(self) -> &'static str {
        match self {
            Origin::Random => "random",
            Origin::Crossover => "crossover",
            Origin::Mutation => "mutation",
            Origin::Reproduction => "reproduction",
            Origin::NnSeeded => "nn_seeded",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Origin {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Origin::ALL.into_iter().find(|o| o.name() == s).ok_or_else(|| format!("unknown origin `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub tree: ExprTree,
    /// Mean TEU/h over the evaluation instances; `-inf` if a run failed.
    pub fitness: Option<f64>,
    pub origin: Origin,
}

impl Individual {
    pub fn new(tree: ExprTree, origin: Origin) -> Self {
        Self { tree, fitness: None, origin }
    }

    /// Fitness for selection; unevaluated counts as worst.
    pub fn score(&self) -> f64 {
        self.fitness.unwrap_or(f64::NEG_INFINITY)
    }
}

/// Index of the fittest individual; ties go to the lowest index.
pub fn best_index(population: &[Individual]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, ind) in population.iter().enumerate() {
        if best.is_none_or(|b| ind.score() > population[b].score()) {
            best = Some(i);
        }
    }
    best
}

/// Population indices sorted best first, stable on ties.
pub fn ranked(population: &[Individual]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..population.len()).collect();
    idx.sort_by(|&a, &b| population[b].score().total_cmp(&population[a].score()));
    idx
}

#[cfg(test)]
mod tests;
