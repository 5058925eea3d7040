use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::variation::tournament;
use super::*;
use crate::expr::{parse_expr, validate_prefix, Node, Token};
use crate::experiment::{gen_instance, GeneratorConfig};
use crate::heuristics::Baseline;
use crate::sim::{run_simulation, Feature, TerminalInstance};

fn small(seed: u64, tasks: usize) -> TerminalInstance {
    gen_instance(seed, &GeneratorConfig { tasks, ..GeneratorConfig::desk() }).unwrap()
}

fn cfg(m: usize) -> GpConfig {
    GpConfig { population_size: m, ..GpConfig::desk() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn deep_tree(depth: usize) -> ExprTree {
    let mut node = Node::leaf(Token::Feature(Feature::TravelTime));
    for _ in 0..depth {
        node = Node::new(Token::Op(crate::expr::Op::Max), vec![node, Node::leaf(Token::Const(1))]);
    }
    ExprTree::new(node)
}

#[test]
fn config_validation() {
    assert!(GpConfig::default().validate().is_ok());
    assert!(GpConfig::desk().validate().is_ok());
    assert!(GpConfig { crossover_rate: 0.7, ..GpConfig::default() }.validate().is_err());
    assert!(GpConfig { population_size: 1, elitism: 0, ..GpConfig::default() }.validate().is_err());
    assert!(GpConfig { init_depth: (2, 18), ..GpConfig::default() }.validate().is_err());
}

#[test]
fn random_population_respects_init_depths() {
    let c = cfg(64);
    let p = init_population(&c, &[], &mut rng(1));
    assert_eq!(p.population.len(), 64);
    for ind in &p.population {
        assert_eq!(ind.origin, Origin::Random);
        assert!((2..=6).contains(&ind.tree.depth()), "depth {}", ind.tree.depth());
    }
    let full: Vec<usize> = p.population.iter().step_by(2).map(|i| i.tree.depth()).collect();
    assert_eq!(&full[..5], &[2, 3, 4, 5, 6]);
}

#[test]
fn seeds_enter_population() {
    let c = cfg(64);
    let seeds: Vec<ExprTree> = ramped_half_and_half(&mut rng(2), &c, 32);
    let p = init_population(&c, &seeds, &mut rng(3));
    let seeded = p.population.iter().filter(|i| i.origin == Origin::NnSeeded).count();
    let random = p.population.iter().filter(|i| i.origin == Origin::Random).count();
    assert_eq!((seeded, random), (32, 32));
    assert_eq!(p.population[0].tree, seeds[0]);
}

#[test]
fn too_deep_seed_is_replaced() {
    let c = cfg(64);
    let p = init_population(&c, &[deep_tree(20), deep_tree(3)], &mut rng(4));
    assert_eq!(p.rejected_seeds, vec![0]);
    assert_eq!(p.population.len(), 64);
    assert!(p.population.iter().all(|i| i.tree.depth() <= 17));
    assert_eq!(p.population.iter().filter(|i| i.origin == Origin::NnSeeded).count(), 1);
}

#[test]
fn constant_tree_matches_fifo_run() {
    let inst = small(5, 40);
    let direct = run_simulation(&inst, &Baseline::Fifo, inst.seed()).unwrap().teu_per_hour;
    let mut ev = FitnessEvaluator::new(vec![inst]).unwrap();
    assert_eq!(ev.evaluate_one(&parse_expr("1").unwrap()), direct);
}

#[test]
fn duplicates_share_one_simulation() {
    let mut ev = FitnessEvaluator::new(vec![small(6, 30)]).unwrap();
    let a = parse_expr("+ travel 1").unwrap();
    let b = parse_expr("- travel idle").unwrap();
    let f = ev.evaluate(&[&a, &a, &b, &a]);
    assert_eq!(f[0], f[1]);
    assert_eq!(f[0], f[3]);
    assert_eq!((ev.evaluations(), ev.lookups()), (2, 4));
    ev.evaluate(&[&b]);
    assert_eq!((ev.evaluations(), ev.lookups(), ev.simulations()), (2, 5, 2));
}

#[test]
fn fitness_is_mean_over_instances() {
    let (i1, i2) = (small(7, 30), small(8, 30));
    let t = parse_expr("- 1 travel").unwrap();
    let f1 = FitnessEvaluator::new(vec![i1.clone()]).unwrap().evaluate_one(&t);
    let f2 = FitnessEvaluator::new(vec![i2.clone()]).unwrap().evaluate_one(&t);
    let mut ev = FitnessEvaluator::new(vec![i1, i2]).unwrap();
    assert_eq!(ev.evaluate_one(&t), (f1 + f2) / 2.0);
    assert_eq!(ev.simulations(), 2);
    assert!(FitnessEvaluator::new(vec![]).is_err());
}

#[test]
fn zero_generations_is_identity() {
    let c = cfg(16);
    let mut ev = FitnessEvaluator::new(vec![small(9, 20)]).unwrap();
    let (mut s, _) = GpState::new(&c, &[], 1, &mut ev).unwrap();
    let before = s.population.clone();
    assert!(evolve(&mut s, &c, 0, &mut ev).unwrap().is_empty());
    assert_eq!(s.population, before);
    assert_eq!(s.generation, 0);
}

#[test]
fn flat_landscape_keeps_best_constant() {
    // with a single task every dispatcher yields the same schedule
    let c = cfg(16);
    let mut ev = FitnessEvaluator::new(vec![small(10, 1)]).unwrap();
    let (mut s, _) = GpState::new(&c, &[], 2, &mut ev).unwrap();
    let b0 = s.stats().best;
    let h = evolve(&mut s, &c, 10, &mut ev).unwrap();
    assert!(h.iter().all(|r| r.best == b0));
}

#[test]
fn best_fitness_never_decreases() {
    for seed in 0..3 {
        let c = cfg(24);
        let mut ev = FitnessEvaluator::new(vec![small(20 + seed, 40)]).unwrap();
        let run = run_gp(&GpConfig { generations: 12, ..c }, seed, &mut ev).unwrap();
        assert_eq!(run.history.len(), 13);
        for w in run.history.windows(2) {
            assert!(w[1].best >= w[0].best, "seed {seed}: {} -> {}", w[0].best, w[1].best);
        }
        assert_eq!(run.best.fitness, Some(run.history.last().unwrap().best));
    }
}

#[test]
fn evolution_is_reproducible() {
    let c = GpConfig { generations: 5, ..cfg(20) };
    let inst = small(30, 40);
    let a = run_gp(&c, 7, &mut FitnessEvaluator::new(vec![inst.clone()]).unwrap()).unwrap();
    let b = run_gp(&c, 7, &mut FitnessEvaluator::new(vec![inst.clone()]).unwrap()).unwrap();
    assert_eq!(a.state.population, b.state.population);
    assert_eq!(a.history, b.history);
    let c2 = run_gp(&c, 8, &mut FitnessEvaluator::new(vec![inst]).unwrap()).unwrap();
    assert_ne!(a.state.population, c2.state.population);
}

#[test]
fn desk_run_beats_random_dispatch() {
    let inst = gen_instance(42, &GeneratorConfig::desk()).unwrap();
    let random = run_simulation(&inst, &Baseline::Random, inst.seed()).unwrap().teu_per_hour;
    let mut ev = FitnessEvaluator::new(vec![inst]).unwrap();
    let run = run_gp(&GpConfig::desk(), 1, &mut ev).unwrap();
    assert!(run.best.score() >= random, "gp {} vs random {random}", run.best.score());
}

#[test]
fn leaf_crossover_yields_a_terminal() {
    let a = parse_expr("travel").unwrap();
    let b = parse_expr("idle").unwrap();
    for s in 0..20 {
        let child = subtree_crossover(&mut rng(s), &a, &b, 17);
        assert_eq!(child, b);
    }
}

#[test]
fn root_mutation_is_depth_bounded() {
    let c = GpConfig { mutation_depth: 3, ..GpConfig::desk() };
    let t = parse_expr("if_else >= travel 5 * qc_trucks qc_remain 2").unwrap();
    for s in 0..200 {
        let m = subtree_mutation_at(&mut rng(s), &t, 0, &c).unwrap();
        assert!(m.depth() <= 3);
    }
    assert!(subtree_mutation_at(&mut rng(0), &deep_tree(17), 34, &c).is_some());
}

#[test]
fn variation_closure() {
    let c = cfg(32);
    let mut r = rng(11);
    let mut pop = init_population(&c, &[deep_tree(16), deep_tree(17)], &mut r).population;
    for (i, ind) in pop.iter_mut().enumerate() {
        ind.fitness = Some(i as f64);
    }
    for n in 0..10_000 {
        let child = vary(&mut r, &pop, &c);
        assert!(validate_prefix(&child.tree.to_polish()));
        assert!(child.tree.depth() <= 17);
        if n % 50 == 0 {
            let k = n / 50 % pop.len();
            pop[k] = Individual { fitness: Some(k as f64), ..child };
        }
    }
}

#[test]
fn operator_rates_match_configuration() {
    let c = GpConfig::default();
    let mut r = rng(12);
    let mut counts = [0usize; 3];
    let n = 10_000;
    for _ in 0..n {
        counts[choose_variation(&mut r, &c) as usize] += 1;
    }
    for (k, want) in counts.iter().zip([0.6, 0.3, 0.1]) {
        assert!((*k as f64 / n as f64 - want).abs() < 0.02, "{counts:?}");
    }
}

#[test]
fn tournament_prefers_fitter() {
    let c = cfg(8);
    let mut pop = init_population(&c, &[], &mut rng(13)).population;
    for (i, ind) in pop.iter_mut().enumerate() {
        ind.fitness = Some(i as f64);
    }
    let mut r = rng(14);
    let wins = (0..1000).filter(|_| tournament(&mut r, &pop, 8) >= 4).count();
    assert!(wins > 900);
    assert_eq!(tournament(&mut r, &pop, 1000), 7);
}

#[test]
fn checkpoint_resume_matches_continuous_run() {
    let c = cfg(16);
    let inst = small(40, 30);
    let mut ev = FitnessEvaluator::new(vec![inst.clone()]).unwrap();
    let (mut s, _) = GpState::new(&c, &[], 3, &mut ev).unwrap();
    evolve(&mut s, &c, 3, &mut ev).unwrap();
    let cp = Checkpoint::capture(&s);
    let mut resumed = cp.restore().unwrap();
    assert_eq!(resumed.population, s.population);
    assert_eq!(Checkpoint::capture(&resumed), cp);

    evolve(&mut s, &c, 3, &mut ev).unwrap();
    let mut ev2 = FitnessEvaluator::new(vec![inst]).unwrap();
    evolve(&mut resumed, &c, 3, &mut ev2).unwrap();
    assert_eq!(resumed.population, s.population);
    assert_eq!(resumed.generation, 6);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gp.ckpt");
    cp.save(&path).unwrap();
    assert_eq!(Checkpoint::load(&path).unwrap(), cp);
    assert!(Checkpoint("garbage".into()).restore().is_err());
}

#[test]
fn log_round_trip() {
    let c = GpConfig { generations: 4, ..cfg(12) };
    let mut ev = FitnessEvaluator::new(vec![small(50, 20)]).unwrap();
    let run = run_gp(&c, 0, &mut ev).unwrap();
    let mut buf = Vec::new();
    write_log(&mut buf, &run.history).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("generation,best,mean,median,best_tokens\n"));
    assert_eq!(read_log(&buf[..]).unwrap(), run.history);
    let mut empty = Vec::new();
    write_log(&mut empty, &[]).unwrap();
    assert!(read_log(&empty[..]).unwrap().is_empty());
}

#[test]
fn stats_summaries() {
    let t = parse_expr("1").unwrap();
    let pop: Vec<Individual> = [3.0, 1.0, f64::NEG_INFINITY, 2.0]
        .iter()
        .map(|&f| Individual { tree: t.clone(), fitness: Some(f), origin: Origin::Random })
        .collect();
    let s = generation_stats(4, &pop);
    assert_eq!((s.best, s.mean, s.median, s.best_tokens), (3.0, 2.0, 1.5, 1));
    assert_eq!(ranked(&pop), vec![0, 3, 1, 2]);
}
