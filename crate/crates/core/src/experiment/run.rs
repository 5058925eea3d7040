//! Running methods: fixed rules are scored directly, learned methods search
//! on the training set and their best expression is scored on every set.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::plan::{ExperimentPlan, Method, MethodSettings};
use super::report::{summarize, CurvePoint, ResultRow, SignTestRow, SummaryRow};
use super::stats::sign_test;
use super::ExperimentError;
use crate::expr::ExprTree;
use crate::gp::{run_gp, run_gp_budget, FitnessEvaluator};
use crate::heuristics::{Baseline, ManualHeuristic};
use crate::hybrid::{report_token_counts, run_hybrid, TokenSummary};
use crate::nn::{standalone_search, StandaloneConfig};
use crate::sim::{simulate, Dispatcher, SimOptions, TerminalInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Train,
    Test,
}

impl Block {
    pub fn name(self) -> &'static str {
        match self {
            Block::Train => "train",
            Block::Test => "test",
        }
    }
}

/// A loaded instance with its origin and content hash.
#[derive(Clone, Debug)]
pub struct InstanceEntry {
    pub name: String,
    pub block: Block,
    pub path: Option<PathBuf>,
    pub sha256: String,
    pub instance: TerminalInstance,
}

impl InstanceEntry {
    pub fn new(name: impl Into<String>, block: Block, instance: TerminalInstance) -> Self {
        let sha256 = hex(&Sha256::digest(instance.to_toml().as_bytes()));
        Self { name: name.into(), block, path: None, sha256, instance }
    }

    pub fn load(path: PathBuf, block: Block) -> Result<Self, ExperimentError> {
        if !path.exists() {
            return Err(ExperimentError::MissingInstance(path));
        }
        let text = std::fs::read_to_string(&path)?;
        let instance = TerminalInstance::from_toml(&text)?;
        let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        let sha256 = hex(&Sha256::digest(text.as_bytes()));
        Ok(Self { name, block, path: Some(path), sha256, instance })
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Loads every instance named by the plan, training sets first.
pub fn load_instances(plan: &ExperimentPlan) -> Result<Vec<InstanceEntry>, ExperimentError> {
    let train = plan.train.iter().map(|p| InstanceEntry::load(p.clone(), Block::Train));
    let test = plan.test.iter().map(|p| InstanceEntry::load(p.clone(), Block::Test));
    train.chain(test).collect()
}

/// One learned method's search on the training set.
#[derive(Clone, Debug)]
pub struct LearnedRun {
    pub method: Method,
    pub seed: u64,
    pub best: ExprTree,
    /// Mean TEU/h over the training instances.
    pub fitness: f64,
    pub curve: Vec<CurvePoint>,
    /// Distinct heuristics simulated during the search.
    pub evaluations: usize,
}

fn curve(method: Method, seed: u64, points: impl Iterator<Item = (usize, f64)>) -> Vec<CurvePoint> {
    points
        .map(|(generation, best_fitness)| CurvePoint { method: method.name().into(), seed, generation, best_fitness })
        .collect()
}

/// Searches for a heuristic with a learned method.
pub fn learn(
    method: Method,
    settings: &MethodSettings,
    train: &[TerminalInstance],
    seed: u64,
) -> Result<LearnedRun, ExperimentError> {
    let mut ev = FitnessEvaluator::new(train.to_vec())?;
    let (best, fitness, curve) = if method == Method::Lgp {
        let run = run_gp(&settings.gp, seed, &mut ev)?;
        let c = curve(method, seed, run.history.iter().map(|h| (h.generation, h.best)));
        (run.best.tree.clone(), run.best.score(), c)
    } else if let Some((kind, seeding)) = method.hybrid() {
        let run = run_hybrid(&settings.hybrid(kind, seeding, seed), &mut ev)?;
        let c = curve(method, seed, run.history.iter().map(|h| (h.generation, h.best)));
        (run.best.tree.clone(), run.best.score(), c)
    } else if let Some(kind) = method.standalone() {
        let cfg = StandaloneConfig::new(settings.policy(kind), settings.standalone_budget(), seed);
        let run = standalone_search(&cfg, &mut ev)?;
        let c = curve(method, seed, run.history.iter().map(|h| (h.generation, h.best)));
        (run.best.tree.clone(), run.best.score(), c)
    } else {
        return Err(ExperimentError::Plan(format!("`{method}` is not a learned method")));
    };
    Ok(LearnedRun { method, seed, best, fitness, curve, evaluations: ev.evaluations() })
}

/// A hybrid run and a plain-GP run granted the same number of distinct
/// simulated heuristics.
#[derive(Clone, Debug)]
pub struct BudgetMatched {
    pub hybrid: LearnedRun,
    pub lgp: LearnedRun,
}

/// Runs `method`, then plain GP with the same seed until it has simulated at
/// least as many distinct heuristics.
pub fn budget_matched(
    method: Method,
    settings: &MethodSettings,
    train: &[TerminalInstance],
    seed: u64,
) -> Result<BudgetMatched, ExperimentError> {
    let hybrid = learn(method, settings, train, seed)?;
    let mut ev = FitnessEvaluator::new(train.to_vec())?;
    let cap = 100 * settings.gp.generations.max(1);
    let run = run_gp_budget(&settings.gp, seed, &mut ev, hybrid.evaluations, cap)?;
    let lgp = LearnedRun {
        method: Method::Lgp,
        seed,
        fitness: run.best.score(),
        curve: curve(Method::Lgp, seed, run.history.iter().map(|h| (h.generation, h.best))),
        best: run.best.tree,
        evaluations: ev.evaluations(),
    };
    Ok(BudgetMatched { hybrid, lgp })
}

/// TEU/h of a fixed rule on one instance.
pub fn score_fixed(method: Method, instance: &TerminalInstance, seed: u64) -> Result<f64, ExperimentError> {
    let manual;
    let d: &dyn Dispatcher = match method {
        Method::Manual => {
            manual = ManualHeuristic::for_instance(instance);
            &manual
        }
        Method::Random => &Baseline::Random,
        Method::Fifo => &Baseline::Fifo,
        Method::Stt => &Baseline::Stt,
        Method::Mtr => &Baseline::Mtr,
        _ => return Err(ExperimentError::Plan(format!("`{method}` is not a fixed rule"))),
    };
    Ok(simulate(instance, d, seed, SimOptions::default())?.teu_per_hour)
}

/// TEU/h of an expression on one instance, simulated as during training.
pub fn score_tree(tree: &ExprTree, instance: &TerminalInstance) -> Result<f64, ExperimentError> {
    Ok(simulate(instance, tree, instance.seed(), SimOptions::default())?.teu_per_hour)
}

#[derive(Clone, Debug)]
pub struct ExperimentResults {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub sign_tests: Vec<SignTestRow>,
    pub curves: Vec<CurvePoint>,
    pub tokens: Vec<TokenSummary>,
    pub learned: Vec<LearnedRun>,
}

/// Runs every (method, repetition) cell of the plan on the given instances.
pub fn run_experiment(
    plan: &ExperimentPlan,
    settings: &MethodSettings,
    instances: &[InstanceEntry],
) -> Result<ExperimentResults, ExperimentError> {
    plan.validate()?;
    let train: Vec<TerminalInstance> =
        instances.iter().filter(|e| e.block == Block::Train).map(|e| e.instance.clone()).collect();
    let cells: Vec<(Method, usize, u64)> = plan
        .methods
        .iter()
        .flat_map(|&m| plan.seeds().into_iter().enumerate().map(move |(r, s)| (m, r, s)))
        .collect();

    let learned: Vec<LearnedRun> = cells
        .par_iter()
        .filter(|(m, _, _)| m.is_learned())
        .map(|&(m, _, s)| learn(m, settings, &train, s))
        .collect::<Result<_, _>>()?;

    let rows: Vec<Vec<ResultRow>> = cells
        .par_iter()
        .map(|&(method, repetition, seed)| {
            let tree = learned.iter().find(|l| l.method == method && l.seed == seed).map(|l| &l.best);
            instances
                .iter()
                .map(|e| {
                    let teu_per_hour = match tree {
                        Some(t) => score_tree(t, &e.instance)?,
                        None => score_fixed(method, &e.instance, seed)?,
                    };
                    Ok(ResultRow {
                        method: method.name().into(),
                        block: e.block,
                        set: e.name.clone(),
                        repetition,
                        seed,
                        teu_per_hour,
                        tokens: tree.map(|t| t.token_count()),
                    })
                })
                .collect::<Result<Vec<_>, ExperimentError>>()
        })
        .collect::<Result<_, _>>()?;
    let rows: Vec<ResultRow> = rows.into_iter().flatten().collect();
    let summary = summarize(&rows);
    let sign_tests = sign_tests(&plan.sign_tests, &summary);
    let curves = learned.iter().flat_map(|l| l.curve.iter().cloned()).collect();
    let tokens = report_token_counts(learned.iter().map(|l| (l.method.name(), &l.best)));
    Ok(ExperimentResults { rows, summary, sign_tests, curves, tokens, learned })
}

/// Sign tests over paired per-set means, one per block.
pub fn sign_tests(pairs: &[(Method, Method)], summary: &[SummaryRow]) -> Vec<SignTestRow> {
    let mut out = Vec::new();
    for &(a, b) in pairs {
        for block in [Block::Train, Block::Test] {
            let means = |m: Method| -> Vec<(String, f64)> {
                summary
                    .iter()
                    .filter(|r| r.method == m.name() && r.block == block && !r.is_average())
                    .map(|r| (r.set.clone(), r.mean))
                    .collect()
            };
            let (xa, xb) = (means(a), means(b));
            if xa.is_empty() || xa.len() != xb.len() {
                continue;
            }
            let va: Vec<f64> = xa.iter().map(|x| x.1).collect();
            let vb: Vec<f64> = xb.iter().map(|x| x.1).collect();
            out.push(SignTestRow::new(a.name(), b.name(), block, sign_test(&va, &vb)));
        }
    }
    out
}
