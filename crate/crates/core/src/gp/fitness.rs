use std::collections::HashMap;

use rayon::prelude::*;

use super::{GpError, Individual};
use crate::expr::ExprTree;
use crate::sim::{simulate, SimOptions, TerminalInstance};

/// Mean TEU/h of a heuristic over a fixed instance set, memoized by the
/// tree's prefix text. Unseen trees are simulated in parallel.
pub struct FitnessEvaluator {
    instances: Vec<TerminalInstance>,
    cache: HashMap<String, f64>,
    lookups: usize,
    evaluations: usize,
    failures: Vec<(String, String)>,
}

impl FitnessEvaluator {
    pub fn new(instances: Vec<TerminalInstance>) -> Result<Self, GpError> {
        if instances.is_empty() {
            return Err(GpError::NoInstances);
        }
        Ok(Self { instances, cache: HashMap::new(), lookups: 0, evaluations: 0, failures: Vec::new() })
    }

    pub fn instances(&self) -> &[TerminalInstance] {
        &self.instances
    }

    /// Fitness requests served, cached or not.
    pub fn lookups(&self) -> usize {
        self.lookups
    }

    /// Distinct heuristics simulated.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Simulator runs: evaluations times instances.
    pub fn simulations(&self) -> usize {
        self.evaluations * self.instances.len()
    }

    /// Heuristics whose simulation failed, with the error text.
    pub fn failures(&self) -> &[(String, String)] {
        &self.failures
    }

    pub fn cached(&self, tree: &ExprTree) -> Option<f64> {
        self.cache.get(&tree.to_string()).copied()
    }

    fn run(instances: &[TerminalInstance], tree: &ExprTree) -> Result<f64, String> {
        let mut total = 0.0;
        for inst in instances {
            let r = simulate(inst, tree, inst.seed(), SimOptions::default()).map_err(|e| e.to_string())?;
            total += r.teu_per_hour;
        }
        Ok(total / instances.len() as f64)
    }

    pub fn evaluate(&mut self, trees: &[&ExprTree]) -> Vec<f64> {
        let keys: Vec<String> = trees.iter().map(|t| t.to_string()).collect();
        let mut fresh: Vec<usize> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, k) in keys.iter().enumerate() {
            if !self.cache.contains_key(k) && seen.insert(k.as_str()) {
                fresh.push(i);
            }
        }
        let instances = &self.instances;
        let results: Vec<Result<f64, String>> = fresh.par_iter().map(|&i| Self::run(instances, trees[i])).collect();
        for (&i, r) in fresh.iter().zip(results) {
            let f = r.unwrap_or_else(|e| {
                self.failures.push((keys[i].clone(), e));
                f64::NEG_INFINITY
            });
            self.cache.insert(keys[i].clone(), f);
        }
        self.evaluations += fresh.len();
        self.lookups += trees.len();
        keys.iter().map(|k| self.cache[k]).collect()
    }

    pub fn evaluate_one(&mut self, tree: &ExprTree) -> f64 {
        self.evaluate(&[tree])[0]
    }

    /// Fills in every missing fitness.
    pub fn evaluate_population(&mut self, population: &mut [Individual]) {
        let todo: Vec<usize> = (0..population.len()).filter(|&i| population[i].fitness.is_none()).collect();
        let trees: Vec<&ExprTree> = todo.iter().map(|&i| &population[i].tree).collect();
        let fits = self.evaluate(&trees);
        for (i, f) in todo.into_iter().zip(fits) {
            population[i].fitness = Some(f);
        }
    }
}
