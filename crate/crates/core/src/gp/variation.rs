use rand::Rng;

use super::init::{random_tree, InitMethod};
use super::{GpConfig, Individual, Origin};
use crate::expr::ExprTree;

/// Attempts at finding a depth-valid variation point before falling back
/// to reproduction.
pub const MAX_RETRIES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variation {
    Crossover,
    Mutation,
    Reproduction,
}

pub fn choose_variation<R: Rng + ?Sized>(rng: &mut R, cfg: &GpConfig) -> Variation {
    let u: f64 = rng.random();
    if u < cfg.crossover_rate {
        Variation::Crossover
    } else if u < cfg.crossover_rate + cfg.mutation_rate {
        Variation::Mutation
    } else {
        Variation::Reproduction
    }
}

/// Picks a node: an internal node with probability 0.9 when one exists,
/// otherwise a leaf.
pub fn point_of_variation<R: Rng + ?Sized>(rng: &mut R, tree: &ExprTree) -> usize {
    let polish = tree.to_polish();
    let (internal, leaves): (Vec<usize>, Vec<usize>) = (0..polish.len()).partition(|&i| !polish[i].is_terminal());
    let pool = if !internal.is_empty() && rng.random::<f64>() < 0.9 { internal } else { leaves };
    pool[rng.random_range(0..pool.len())]
}

fn try_crossover<R: Rng + ?Sized>(rng: &mut R, a: &ExprTree, b: &ExprTree, max_depth: usize) -> Option<ExprTree> {
    for _ in 0..MAX_RETRIES {
        let i = point_of_variation(rng, a);
        let j = point_of_variation(rng, b);
        let donor = b.subtree(j);
        if a.node_depth(i) + donor.depth() <= max_depth {
            return Some(a.replace_subtree(i, donor.clone()));
        }
    }
    None
}

/// Replaces a subtree of `a` with a subtree of `b`. Falls back to a copy
/// of `a` when no depth-valid pair is found.
pub fn subtree_crossover<R: Rng + ?Sized>(rng: &mut R, a: &ExprTree, b: &ExprTree, max_depth: usize) -> ExprTree {
    try_crossover(rng, a, b, max_depth).unwrap_or_else(|| a.clone())
}

/// Replaces the node at `index` with a freshly grown subtree.
pub fn subtree_mutation_at<R: Rng + ?Sized>(
    rng: &mut R,
    tree: &ExprTree,
    index: usize,
    cfg: &GpConfig,
) -> Option<ExprTree> {
    let room = cfg.max_depth.checked_sub(tree.node_depth(index))?;
    let depth = rng.random_range(0..=cfg.mutation_depth.min(room));
    Some(tree.replace_subtree(index, random_tree(rng, InitMethod::Grow, 0, depth)))
}

fn try_mutation<R: Rng + ?Sized>(rng: &mut R, tree: &ExprTree, cfg: &GpConfig) -> Option<ExprTree> {
    (0..MAX_RETRIES).find_map(|_| {
        let i = point_of_variation(rng, tree);
        subtree_mutation_at(rng, tree, i, cfg)
    })
}

pub fn subtree_mutation<R: Rng + ?Sized>(rng: &mut R, tree: &ExprTree, cfg: &GpConfig) -> ExprTree {
    try_mutation(rng, tree, cfg).unwrap_or_else(|| tree.clone())
}

/// Tournament with replacement; the first drawn of equally fit entrants wins.
pub(crate) fn tournament<R: Rng + ?Sized>(rng: &mut R, population: &[Individual], size: usize) -> usize {
    let mut best = rng.random_range(0..population.len());
    for _ in 1..size {
        let c = rng.random_range(0..population.len());
        if population[c].score() > population[best].score() {
            best = c;
        }
    }
    best
}

/// Breeds one offspring from `population`.
pub fn vary<R: Rng + ?Sized>(rng: &mut R, population: &[Individual], cfg: &GpConfig) -> Individual {
    let kind = choose_variation(rng, cfg);
    let a = &population[tournament(rng, population, cfg.tournament_size)];
    let child = match kind {
        Variation::Crossover => {
            let b = &population[tournament(rng, population, cfg.tournament_size)];
            try_crossover(rng, &a.tree, &b.tree, cfg.max_depth).map(|t| (t, Origin::Crossover))
        }
        Variation::Mutation => try_mutation(rng, &a.tree, cfg).map(|t| (t, Origin::Mutation)),
        Variation::Reproduction => None,
    };
    match child {
        Some((tree, origin)) => Individual::new(tree, origin),
        None => Individual::new(a.tree.clone(), Origin::Reproduction),
    }
}
