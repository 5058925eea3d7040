use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gprt::gp::FitnessEvaluator;
use gprt::heuristics::{Baseline, ManualHeuristic};
use gprt::nn::{PolicyConfig, PolicyNet, TrainState};
use gprt::sim::{simulate, FeatureVector, SimOptions};
use gprt_bench::{desk_instance, sample_heuristic};

fn simulation(c: &mut Criterion) {
    let inst = desk_instance();
    let manual = ManualHeuristic::for_instance(&inst);
    let tree = sample_heuristic();
    let mut g = c.benchmark_group("simulate_desk");
    g.bench_function("fifo", |b| b.iter(|| simulate(black_box(&inst), &Baseline::Fifo, 0, SimOptions::default())));
    g.bench_function("manual", |b| b.iter(|| simulate(black_box(&inst), &manual, 0, SimOptions::default())));
    g.bench_function("expression", |b| b.iter(|| simulate(black_box(&inst), &tree, 0, SimOptions::default())));
    g.finish();
}

fn expression_eval(c: &mut Criterion) {
    let tree = sample_heuristic();
    let fv = FeatureVector([3.0, 1.0, 40.0, 2.0, 0.0, 5.0, 90.0, 120.0, 1.0, 7.0, 2.0, 60.0, 30.0, 0.5]);
    c.bench_function("eval_expression", |b| b.iter(|| black_box(&tree).eval(black_box(&fv))));
    c.bench_function("fitness_cold_cache", |b| {
        b.iter_batched(
            || FitnessEvaluator::new(vec![desk_instance()]).unwrap(),
            |mut ev| ev.evaluate_one(&tree),
            BatchSize::SmallInput,
        )
    });
}

fn sampling(c: &mut Criterion) {
    let mut g = c.benchmark_group("sample");
    for cfg in [PolicyConfig::lstm(), PolicyConfig::transformer()] {
        let p = PolicyNet::new(&cfg, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        g.bench_function(cfg.kind.to_string(), |b| b.iter(|| p.sample(&mut rng, cfg.max_len, cfg.max_depth)));
    }
    g.finish();
}

fn train_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("train_step_batch64");
    for cfg in [PolicyConfig::lstm(), PolicyConfig::transformer()] {
        let state = TrainState::new(cfg.clone(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch: Vec<_> =
            (0..64).map(|i| (state.policy.sample(&mut rng, cfg.max_len, cfg.max_depth).tokens, i as f64)).collect();
        g.bench_function(cfg.kind.to_string(), |b| {
            b.iter_batched(|| state.clone(), |mut s| s.train_step(&batch).unwrap(), BatchSize::LargeInput)
        });
    }
    g.finish();
}

criterion_group!(benches, simulation, expression_eval, sampling, train_step);
criterion_main!(benches);
