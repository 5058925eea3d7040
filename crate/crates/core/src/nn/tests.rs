use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::expr::{parse_expr, validate_prefix, ExprTree, Token};
use crate::gp::{init_population, FitnessEvaluator, GpConfig};
use crate::heuristics::{rank_by_score, rank_covariance, ManualHeuristic};
use crate::sim::fixtures::{line_terminal, task};
use crate::sim::{run_simulation, TaskKind, TerminalInstance};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| r.random_range(-2.0..2.0)).collect()).unwrap()
}

/// Direct transcription of softmax(Q K^T / sqrt(d)) V.
fn naive_attention(q: &Matrix, k: &Matrix, v: &Matrix, causal: bool) -> Vec<Vec<f64>> {
    let d = q.cols as f64;
    (0..q.rows)
        .map(|i| {
            let s: Vec<f64> = (0..k.rows)
                .map(|j| {
                    if causal && j > i {
                        f64::NEG_INFINITY
                    } else {
                        (0..q.cols).map(|c| q.row(i)[c] * k.row(j)[c]).sum::<f64>() / d.sqrt()
                    }
                })
                .collect();
            let e: Vec<f64> = s.iter().map(|x| x.exp()).collect();
            let z: f64 = e.iter().sum();
            (0..v.cols).map(|c| (0..k.rows).map(|j| e[j] / z * v.row(j)[c]).sum()).collect()
        })
        .collect()
}

fn small_cfg(kind: PolicyKind, width: usize) -> PolicyConfig {
    match kind {
        PolicyKind::Lstm => PolicyConfig { embed: width / 2 + 1, hidden: width, max_len: 12, ..PolicyConfig::lstm() },
        PolicyKind::Transformer => {
            PolicyConfig { hidden: width, heads: 2, ffn: 2 * width, max_len: 12, ..PolicyConfig::transformer() }
        }
    }
}

const KINDS: [PolicyKind; 2] = [PolicyKind::Lstm, PolicyKind::Transformer];

#[test]
fn attention_single_key_returns_value() {
    let mut r = rng(1);
    let q = random_matrix(&mut r, 1, 4);
    let k = random_matrix(&mut r, 1, 4);
    let v = random_matrix(&mut r, 1, 3);
    assert_eq!(attention(&q, &k, &v, false).unwrap(), v);
}

#[test]
fn attention_identical_keys_average_values() {
    let mut r = rng(2);
    let q = random_matrix(&mut r, 2, 4);
    let row = random_matrix(&mut r, 1, 4);
    let k = Matrix::new(3, 4, row.data.repeat(3)).unwrap();
    let v = random_matrix(&mut r, 3, 2);
    let out = attention(&q, &k, &v, false).unwrap();
    for i in 0..2 {
        for c in 0..2 {
            let mean = (v.row(0)[c] + v.row(1)[c] + v.row(2)[c]) / 3.0;
            assert!((out.row(i)[c] - mean).abs() < 1e-12);
        }
    }
}

#[test]
fn attention_matches_direct_formula() {
    for seed in 0..20 {
        let mut r = rng(100 + seed);
        let q = random_matrix(&mut r, 3, 4);
        let k = random_matrix(&mut r, 3, 4);
        let v = random_matrix(&mut r, 3, 4);
        for causal in [false, true] {
            let out = attention(&q, &k, &v, causal).unwrap();
            let want = naive_attention(&q, &k, &v, causal);
            for i in 0..3 {
                for c in 0..4 {
                    assert!((out.row(i)[c] - want[i][c]).abs() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn attention_rejects_bad_shapes() {
    let mut r = rng(3);
    let q = random_matrix(&mut r, 2, 4);
    assert!(attention(&q, &random_matrix(&mut r, 2, 3), &random_matrix(&mut r, 2, 3), false).is_err());
    assert!(attention(&q, &random_matrix(&mut r, 2, 4), &random_matrix(&mut r, 3, 3), false).is_err());
    assert!(attention(&q, &random_matrix(&mut r, 1, 4), &random_matrix(&mut r, 1, 3), true).is_err());
}

#[test]
fn attention_rows_are_stochastic_and_causal() {
    let mut r = rng(4);
    let q = random_matrix(&mut r, 5, 4);
    let k = random_matrix(&mut r, 5, 4);
    let w = attention_weights(&q, &k, true).unwrap();
    for t in 0..5 {
        let row = w.row(t);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(row[t + 1..].iter().all(|&x| x == 0.0));
        assert!(row.iter().all(|&x| x >= 0.0));
    }
    let v = random_matrix(&mut r, 5, 3);
    let base = attention(&q, &k, &v, true).unwrap();
    let (mut k2, mut v2) = (k.clone(), v.clone());
    for c in 0..4 {
        k2.data[4 * 4 + c] += 1.5;
    }
    v2.data[4 * 3] -= 3.0;
    let pert = attention(&q, &k2, &v2, true).unwrap();
    assert_eq!(&base.data[..4 * 3], &pert.data[..4 * 3]);
}

#[test]
fn transformer_is_causal() {
    let net = match PolicyNet::new(&PolicyConfig::transformer(), 5) {
        PolicyNet::Transformer(t) => t,
        _ => unreachable!(),
    };
    let a = net.hidden_states(&[vocab::BOS, 3, 17, 22, 4]);
    let b = net.hidden_states(&[vocab::BOS, 3, 9, 0, 29]);
    assert_eq!(a[..2], b[..2]);
    assert_ne!(a[2], b[2]);
}

#[test]
fn samples_are_valid_prefix_expressions() {
    for kind in KINDS {
        let cfg = PolicyConfig::of_kind(kind);
        let p = PolicyNet::new(&cfg, 6);
        let mut r = rng(7);
        for _ in 0..10_000 {
            let s = p.sample(&mut r, cfg.max_len, cfg.max_depth);
            assert!(validate_prefix(&s.tokens));
            assert!(s.tokens.len() <= cfg.max_len);
            assert!(s.tree().depth() <= cfg.max_depth);
            assert!(s.log_prob.is_finite() && s.log_prob <= 0.0);
        }
    }
}

#[test]
fn tight_limits_force_termination() {
    for kind in KINDS {
        let p = PolicyNet::new(&PolicyConfig::of_kind(kind), 8);
        let mut r = rng(9);
        for _ in 0..200 {
            let s = p.sample(&mut r, 1, 17);
            assert_eq!(s.tokens.len(), 1);
            assert!(s.tokens[0].is_terminal());
            let s = p.sample(&mut r, 64, 1);
            assert!(s.tree().depth() <= 1);
            let s = p.sample(&mut r, 4, 17);
            assert!(s.tokens.len() <= 4 && validate_prefix(&s.tokens));
        }
    }
}

#[test]
fn sampling_is_deterministic() {
    for kind in KINDS {
        let cfg = PolicyConfig::of_kind(kind);
        let p = PolicyNet::new(&cfg, 10);
        let draw = |seed| {
            let mut r = rng(seed);
            (0..50).map(|_| p.sample(&mut r, cfg.max_len, cfg.max_depth)).collect::<Vec<_>>()
        };
        assert_eq!(draw(1), draw(1));
        assert_ne!(draw(1), draw(2));
        assert_eq!(PolicyNet::new(&cfg, 10), p);
    }
}

#[test]
fn log_prob_reproduces_sampling() {
    for kind in KINDS {
        let cfg = PolicyConfig::of_kind(kind);
        let p = PolicyNet::new(&cfg, 11);
        let mut r = rng(12);
        for _ in 0..500 {
            let s = p.sample(&mut r, cfg.max_len, cfg.max_depth);
            let lp = p.log_prob(&s.tokens, cfg.max_len, cfg.max_depth).unwrap();
            assert!((lp - s.log_prob).abs() < 1e-10);
            for dist in p.distributions(&s.tokens, cfg.max_len, cfg.max_depth).unwrap() {
                assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(dist.iter().all(|&x| x >= 0.0));
            }
        }
    }
}

#[test]
fn uniform_logits_give_uniform_first_step() {
    for kind in KINDS {
        let cfg = PolicyConfig::of_kind(kind);
        let mut p = PolicyNet::new(&cfg, 13);
        p.params_mut().fill(0.0);
        let lp = p.log_prob(&[Token::Feature(crate::sim::Feature::IdleTrucks)], 64, 17).unwrap();
        assert!((lp + (vocab::EMIT as f64).ln()).abs() < 1e-12, "{lp}");
    }
}

#[test]
fn log_prob_rejects_bad_sequences() {
    let cfg = PolicyConfig::lstm();
    let p = PolicyNet::new(&cfg, 14);
    let plus = parse_expr("+ travel 1").unwrap().to_polish();
    assert!(matches!(p.log_prob(&plus[..2], 64, 17), Err(NnError::Incomplete(2))));
    let mut extra = plus.clone();
    extra.push(Token::Const(0));
    assert!(matches!(p.log_prob(&extra, 64, 17), Err(NnError::Disallowed { index: 3, .. })));
    assert!(matches!(p.log_prob(&plus, 2, 17), Err(NnError::Disallowed { index: 0, .. })));
}

#[test]
fn gp_trees_have_finite_likelihood() {
    let gcfg = GpConfig::desk();
    let pop = init_population(&gcfg, &[], &mut rng(15)).population;
    for kind in KINDS {
        let cfg = PolicyConfig::of_kind(kind);
        let p = PolicyNet::new(&cfg, 16);
        for ind in pop.iter().filter(|i| i.tree.token_count() <= cfg.max_len) {
            assert!(p.log_prob(&ind.tree.to_polish(), cfg.max_len, cfg.max_depth).unwrap().is_finite());
        }
    }
}

#[test]
fn zero_advantage_gives_zero_gradient() {
    for kind in KINDS {
        let cfg = PolicyConfig::of_kind(kind);
        let p = PolicyNet::new(&cfg, 17);
        let seq = parse_expr("max travel 2").unwrap().to_polish();
        let (loss, grad) = vpg_loss(&p, &cfg, &[(seq, 5.0)], 5.0, false).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }
}

#[test]
fn surrogate_algebra() {
    let cfg = PolicyConfig::lstm();
    let p = PolicyNet::new(&cfg, 18);
    let s1 = parse_expr("+ travel 1").unwrap().to_polish();
    let s2 = parse_expr("idle").unwrap().to_polish();
    let lp1 = p.log_prob(&s1, 64, 17).unwrap();
    let lp2 = p.log_prob(&s2, 64, 17).unwrap();
    let (loss, _) = vpg_loss(&p, &cfg, &[(s1, 1.0), (s2, -1.0)], 0.0, false).unwrap();
    assert!((loss - (lp2 - lp1) / 2.0).abs() < 1e-12);
    assert!(matches!(vpg_loss(&p, &cfg, &[], 0.0, false), Err(NnError::EmptyBatch)));
}

/// Largest relative error between analytic and central-difference
/// gradients, for a batch of a 3-token sequence plus `extra` samples.
fn gradient_check(kind: PolicyKind, width: usize, extra: usize, seed: u64) -> f64 {
    let cfg = small_cfg(kind, width);
    let mut p = PolicyNet::new(&cfg, seed);
    let mut r = rng(seed + 1000);
    let mut batch = vec![(parse_expr("+ travel 1").unwrap().to_polish(), 3.0)];
    for _ in 0..extra {
        batch.push((p.sample(&mut r, cfg.max_len, cfg.max_depth).tokens, r.random_range(-2.0..4.0)));
    }
    let b = 0.7;
    let (_, grad) = vpg_loss(&p, &cfg, &batch, b, false).unwrap();
    let h = 1e-4;
    let mut worst = 0.0f64;
    for i in 0..grad.len() {
        let x = p.params()[i];
        p.params_mut()[i] = x + h;
        let up = vpg_loss(&p, &cfg, &batch, b, false).unwrap().0;
        p.params_mut()[i] = x - h;
        let down = vpg_loss(&p, &cfg, &batch, b, false).unwrap().0;
        p.params_mut()[i] = x;
        let fd = (up - down) / (2.0 * h);
        let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

#[test]
fn gradients_match_finite_differences() {
    for kind in KINDS {
        for seed in 0..5 {
            let e = gradient_check(kind, 4, 0, seed);
            assert!(e < 1e-4, "{kind} width 4 seed {seed}: {e}");
            let e = gradient_check(kind, 8, 3, seed);
            assert!(e < 1e-4, "{kind} width 8 seed {seed}: {e}");
        }
    }
}

#[test]
fn difference_error_shrinks_quadratically() {
    // the analytic gradient is exact: the residual is truncation error
    let cfg = small_cfg(PolicyKind::Transformer, 4);
    let mut p = PolicyNet::new(&cfg, 1);
    let batch = vec![(parse_expr("if_else >= travel 5 * qc_trucks qc_remain 2").unwrap().to_polish(), 2.0)];
    let (_, grad) = vpg_loss(&p, &cfg, &batch, 0.0, false).unwrap();
    let i = grad.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).unwrap().0;
    let err = |p: &mut PolicyNet, h: f64| {
        let x = p.params()[i];
        p.params_mut()[i] = x + h;
        let up = vpg_loss(p, &cfg, &batch, 0.0, false).unwrap().0;
        p.params_mut()[i] = x - h;
        let down = vpg_loss(p, &cfg, &batch, 0.0, false).unwrap().0;
        p.params_mut()[i] = x;
        ((up - down) / (2.0 * h) - grad[i]).abs()
    };
    let (e3, e4) = (err(&mut p, 1e-3), err(&mut p, 1e-4));
    assert!(e4 < e3 / 50.0, "{e3:e} -> {e4:e}");
}

#[test]
fn training_raises_likelihood_of_rewarded_sequence() {
    for kind in KINDS {
        let mut st = TrainState::new(PolicyConfig::of_kind(kind), 19);
        let seq = parse_expr("if_else >= travel 5 * qc_trucks qc_remain 2").unwrap().to_polish();
        let batch = vec![(seq.clone(), 100.0)];
        let mut prev = st.policy.log_prob(&seq, 64, 17).unwrap();
        for _ in 0..50 {
            st.train_step(&batch).unwrap();
            let lp = st.policy.log_prob(&seq, 64, 17).unwrap();
            assert!(lp > prev, "{kind}: {lp} <= {prev}");
            prev = lp;
        }
        assert_eq!(st.episode, 51);
    }
}

#[test]
fn zero_advantage_step_keeps_parameters() {
    let mut st = TrainState::new(PolicyConfig::lstm(), 20);
    st.baseline = 7.0;
    let before = st.policy.params().to_vec();
    let seq = parse_expr("idle").unwrap().to_polish();
    st.train_step(&[(seq, 7.0)]).unwrap();
    assert_eq!(st.policy.params(), &before[..]);
    assert_eq!(st.adam.t, 1);
}

#[test]
fn baseline_is_ewma() {
    let mut st = TrainState::new(PolicyConfig::lstm(), 21);
    let s = |e: &str| parse_expr(e).unwrap().to_polish();
    let rep = st.train_step(&[(s("idle"), 10.0), (s("travel"), 30.0)]).unwrap();
    assert_eq!(rep.baseline, 0.0);
    assert_eq!(rep.mean_reward, 20.0);
    assert!((st.baseline - 2.0).abs() < 1e-15);
    st.train_step(&[(s("idle"), 12.0)]).unwrap();
    assert!((st.baseline - (0.9 * 2.0 + 0.1 * 12.0)).abs() < 1e-15);
}

#[test]
fn rejected_update_leaves_state() {
    let mut st = TrainState::new(PolicyConfig::lstm(), 22);
    let before = st.clone();
    let s = parse_expr("idle").unwrap().to_polish();
    assert!(st.train_step(&[(s, f64::NAN)]).is_err());
    assert_eq!(st, before);
}

#[test]
fn delta_schedule() {
    assert!((delta(10.0, 100) - 0.1).abs() < 1e-15);
    let st = TrainState::new(PolicyConfig::lstm(), 23);
    assert_eq!(st.delta(), 10.0);
}

fn shuttle() -> TerminalInstance {
    // unload to yard 2, then load from yard 2: no empty travel in between
    let (nodes, travel) = line_terminal(1, 1);
    TerminalInstance::new(
        nodes,
        travel,
        1,
        vec![task(0, 1, 2, TaskKind::Unload, 60.0, 80.0), task(1, 2, 1, TaskKind::Load, 70.0, 50.0)],
        3,
        0,
    )
    .unwrap()
}

#[test]
fn timing_term_zero_without_gap() {
    let inst = shuttle();
    let res = run_simulation(&inst, &parse_expr("1").unwrap(), 0).unwrap();
    assert_eq!(timing_term(&res, &inst), 0.0);
}

#[test]
fn shaped_reward_matches_hand_computation() {
    let inst = crate::experiment::gen_instance(3, &crate::experiment::GeneratorConfig { tasks: 30, ..crate::experiment::GeneratorConfig::desk() }).unwrap();
    let manual = ManualHeuristic::for_instance(&inst);
    let res = run_simulation(&inst, &manual, inst.seed()).unwrap();

    // the manual rule agrees with itself: each decision adds var(1..=k)
    let mut cov = 0.0;
    for d in &res.decisions {
        let k = d.candidates.len() as f64;
        if k >= 2.0 {
            cov += (k * k - 1.0) / 12.0;
        }
    }
    let mut timing = 0.0;
    for chain in res.truck_chains(inst.trucks()) {
        for w in chain.windows(2) {
            timing += res.record(w[0]).unwrap().end - res.record(w[1]).unwrap().start;
        }
    }
    let got = shaped_reward(&res, &inst, &manual, 0.5, 1.0);
    assert!((got - (timing - 0.5 * cov)).abs() < 1e-9 * got.abs().max(1.0));
    let flipped = shaped_reward(&res, &inst, &manual, 0.5, -1.0);
    assert!((flipped - (timing + 0.5 * cov)).abs() < 1e-9 * flipped.abs().max(1.0));
    assert!(timing < 0.0);

    let three = [1, 2, 3];
    assert!((rank_covariance(&three, &three) - 2.0 / 3.0).abs() < 1e-15);
    let tasks: Vec<_> = (0..3).map(crate::sim::TaskId).collect();
    assert_eq!(rank_by_score(&tasks, &[0.0, 0.0, 0.0]), vec![1, 2, 3]);
}

#[test]
fn checkpoint_round_trip_is_exact() {
    for kind in KINDS {
        let mut st = TrainState::new(PolicyConfig::of_kind(kind), 24);
        st.standardize = true;
        let mut r = rng(25);
        let batch: Vec<(Vec<Token>, f64)> = (0..4).map(|i| (st.policy.sample(&mut r, 64, 17).tokens, i as f64)).collect();
        st.train_step(&batch).unwrap();
        let cp = PolicyCheckpoint::capture(&st);
        let back = PolicyCheckpoint::from_json(&cp.to_json()).unwrap().restore().unwrap();
        assert_eq!(back, st);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.json");
        cp.save(&path).unwrap();
        let mut again = PolicyCheckpoint::load(&path).unwrap().restore().unwrap();
        st.train_step(&batch).unwrap();
        again.train_step(&batch).unwrap();
        assert_eq!(again, st);
    }
    let mut cp = PolicyCheckpoint::capture(&TrainState::new(PolicyConfig::lstm(), 0));
    cp.params.pop();
    assert!(cp.restore().is_err());
}

#[test]
fn standalone_search_budget_one() {
    let inst = crate::experiment::gen_instance(5, &crate::experiment::GeneratorConfig { tasks: 30, ..crate::experiment::GeneratorConfig::desk() }).unwrap();
    for kind in KINDS {
        let cfg = StandaloneConfig::new(PolicyConfig::of_kind(kind), 1, 3);
        let mut ev = FitnessEvaluator::new(vec![inst.clone()]).unwrap();
        let run = standalone_search(&cfg, &mut ev).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let first = PolicyNet::new(&cfg.policy, 3).sample(&mut r, 64, 17);
        assert_eq!(run.best.tree, first.tree());
        assert_eq!(ev.lookups(), 1);
        assert_eq!(run.history.len(), 1);
    }
}

#[test]
fn standalone_search_is_reproducible() {
    let inst = crate::experiment::gen_instance(6, &crate::experiment::GeneratorConfig { tasks: 30, ..crate::experiment::GeneratorConfig::desk() }).unwrap();
    let cfg = StandaloneConfig { batch_size: 16, ..StandaloneConfig::new(PolicyConfig::transformer(), 48, 9) };
    let go = || standalone_search(&cfg, &mut FitnessEvaluator::new(vec![inst.clone()]).unwrap()).unwrap();
    let (a, b) = (go(), go());
    assert_eq!(a.best, b.best);
    assert_eq!(a.history, b.history);
    assert_eq!(a.history.len(), 3);
    assert!(a.history.windows(2).all(|w| w[1].best >= w[0].best));
    let _: &ExprTree = &a.best.tree;
}
