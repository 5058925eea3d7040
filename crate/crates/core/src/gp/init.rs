use rand::Rng;

use super::{GpConfig, Individual, Origin};
use crate::expr::{ExprTree, Node, Op, Token, CONSTANT_POOL};
use crate::sim::Feature;

const TERMINALS: usize = Feature::COUNT + CONSTANT_POOL.len();
const PRIMITIVES: usize = Op::ALL.len() + TERMINALS;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMethod {
    /// Operators on every level above `depth`.
    Full,
    /// Any primitive between `min_depth` and `depth`.
    Grow,
}

fn random_terminal<R: Rng + ?Sized>(rng: &mut R) -> Token {
    let i = rng.random_range(0..TERMINALS);
    match Feature::from_index(i) {
        Some(f) => Token::Feature(f),
        None => Token::Const((i - Feature::COUNT) as u8),
    }
}

fn random_op<R: Rng + ?Sized>(rng: &mut R) -> Op {
    Op::ALL[rng.random_range(0..Op::ALL.len())]
}

/// Grows a random subtree whose depth lies in `min_depth..=depth`
/// (`Grow`) or equals `depth` (`Full`).
pub fn random_tree<R: Rng + ?Sized>(rng: &mut R, method: InitMethod, min_depth: usize, depth: usize) -> Node {
    fn go<R: Rng + ?Sized>(rng: &mut R, method: InitMethod, min: usize, max: usize, level: usize) -> Node {
        let op = if level >= max {
            None
        } else if level < min || method == InitMethod::Full {
            Some(random_op(rng))
        } else {
            let i = rng.random_range(0..PRIMITIVES);
            (i < Op::ALL.len()).then(|| Op::ALL[i])
        };
        match op {
            None => Node::leaf(random_terminal(rng)),
            Some(op) => {
                let children = (0..op.arity()).map(|_| go(rng, method, min, max, level + 1)).collect();
                Node::new(Token::Op(op), children)
            }
        }
    }
    go(rng, method, min_depth.min(depth), depth, 0)
}

/// `n` trees cycling through the configured depths, alternating full and grow.
pub fn ramped_half_and_half<R: Rng + ?Sized>(rng: &mut R, cfg: &GpConfig, n: usize) -> Vec<ExprTree> {
    let (lo, hi) = cfg.init_depth;
    let span = hi - lo + 1;
    (0..n)
        .map(|i| {
            let depth = lo + (i / 2) % span;
            let method = if i % 2 == 0 { InitMethod::Full } else { InitMethod::Grow };
            ExprTree::new(random_tree(rng, method, lo, depth))
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct SeededPopulation {
    pub population: Vec<Individual>,
    /// Positions in the seed list that broke the depth bound.
    pub rejected_seeds: Vec<usize>,
}

/// Seeds first (as `nn_seeded`), then ramped half-and-half random trees up
/// to the population size. Seeds deeper than `max_depth` are replaced.
pub fn init_population<R: Rng + ?Sized>(cfg: &GpConfig, seeds: &[ExprTree], rng: &mut R) -> SeededPopulation {
    assert!(seeds.len() <= cfg.population_size, "more seeds than population slots");
    let mut population = Vec::with_capacity(cfg.population_size);
    let mut rejected_seeds = Vec::new();
    for (i, s) in seeds.iter().enumerate() {
        if s.depth() <= cfg.max_depth {
            population.push(Individual::new(s.clone(), Origin::NnSeeded));
        } else {
            rejected_seeds.push(i);
        }
    }
    let fill = cfg.population_size - population.len();
    population.extend(ramped_half_and_half(rng, cfg, fill).into_iter().map(|t| Individual::new(t, Origin::Random)));
    SeededPopulation { population, rejected_seeds }
}
