//! Dispatchers: evolved expressions, the hand-written rule and classical
//! baselines, plus candidate ranking.

use std::fmt;
use std::str::FromStr;

use crate::expr::ExprTree;
use crate::sim::{DecisionContext, Dispatcher, Feature, FeatureVector, TaskId, TerminalInstance};

impl Dispatcher for ExprTree {
    fn score(&self, _: &DecisionContext, _: TaskId, features: &FeatureVector) -> f64 {
        self.eval(features)
    }
}

/// Penalty added once a quay crane holds its truck limit.
pub const TRUCK_LIMIT_PENALTY: f64 = 200_000.0;

/// Hand-crafted per-quay-crane rule. Its raw value is a cost, so the
/// dispatcher scores candidates with the negated value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManualHeuristic {
    pub desired_trucks: f64,
    pub priority: f64,
    pub truck_limit: f64,
}

impl ManualHeuristic {
    pub fn new(desired_trucks: f64, priority: f64, truck_limit: f64) -> Self {
        Self { desired_trucks, priority, truck_limit }
    }

    /// Spreads the fleet evenly over the quay cranes and caps each crane at
    /// twice its share.
    pub fn for_instance(instance: &TerminalInstance) -> Self {
        let qcs = instance.quay_cranes().count().max(1);
        let desired = (instance.trucks() as f64 / qcs as f64).round().max(1.0);
        Self::new(desired, 1.0, 2.0 * desired)
    }

    /// The rule's raw cost for one candidate.
    pub fn raw_score(&self, fv: &FeatureVector) -> f64 {
        manual_heuristic(self, fv)
    }
}

pub fn manual_heuristic(p: &ManualHeuristic, fv: &FeatureVector) -> f64 {
    let travel = fv[Feature::TravelTime];
    let trucks = fv[Feature::QcBoundTrucks];
    let mut score = if trucks < p.desired_trucks {
        travel * (trucks - p.priority)
    } else {
        travel * p.desired_trucks
    };
    if trucks >= p.truck_limit {
        score += TRUCK_LIMIT_PENALTY;
    }
    score
}

impl Dispatcher for ManualHeuristic {
    fn score(&self, _: &DecisionContext, _: TaskId, fv: &FeatureVector) -> f64 {
        -self.raw_score(fv)
    }
}

/// Classical rules used as comparison points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Baseline {
    /// Uniform over candidates, reproducible from the run seed.
    Random,
    /// Smallest instruction index first.
    Fifo,
    /// Shortest empty travel first.
    Stt,
    /// Quay crane with most remaining tasks first.
    Mtr,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [Baseline::Random, Baseline::Fifo, Baseline::Stt, Baseline::Mtr];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Random => "random",
            Baseline::Fifo => "fifo",
            Baseline::Stt => "stt",
            Baseline::Mtr => "mtr",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown baseline `{s}`"))
    }
}

impl Dispatcher for Baseline {
    fn score(&self, ctx: &DecisionContext, task: TaskId, fv: &FeatureVector) -> f64 {
        match self {
            Baseline::Random => unit_hash(ctx.seed, ctx.index as u64, task.0 as u64),
            Baseline::Fifo => -(task.0 as f64),
            Baseline::Stt => -fv[Feature::TravelTime],
            Baseline::Mtr => fv[Feature::QcRemainingTasks],
        }
    }
}

pub fn baseline_dispatchers() -> [Baseline; 4] {
    Baseline::ALL
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic uniform draw in `[0, 1)` keyed by three integers.
fn unit_hash(a: u64, b: u64, c: u64) -> f64 {
    let h = splitmix64(splitmix64(splitmix64(a) ^ b) ^ c);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Ranks `1..=k` by descending score; equal scores rank by task id.
pub fn rank_by_score(tasks: &[TaskId], scores: &[f64]) -> Vec<usize> {
    assert_eq!(tasks.len(), scores.len());
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(tasks[i].cmp(&tasks[j])));
    let mut ranks = vec![0; tasks.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

/// Ranks the candidates of one decision under `dispatcher`.
pub fn rank_candidates<D: Dispatcher + ?Sized>(
    dispatcher: &D,
    ctx: &DecisionContext,
    tasks: &[TaskId],
    features: &[FeatureVector],
) -> Vec<usize> {
    assert!(!tasks.is_empty(), "ranking needs at least one candidate");
    let scores: Vec<f64> = tasks.iter().zip(features).map(|(&t, fv)| dispatcher.score(ctx, t, fv)).collect();
    rank_by_score(tasks, &scores)
}

/// Population covariance of two rank vectors.
pub fn rank_covariance(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let k = a.len() as f64;
    if a.is_empty() {
        return 0.0;
    }
    let ma = a.iter().sum::<usize>() as f64 / k;
    let mb = b.iter().sum::<usize>() as f64 / k;
    a.iter().zip(b).map(|(&x, &y)| (x as f64 - ma) * (y as f64 - mb)).sum::<f64>() / k
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::experiment::{gen_instance, GeneratorConfig};
    use crate::sim::{simulate, SimOptions, TruckId};

    fn fv(travel: f64, trucks: f64) -> FeatureVector {
        FeatureVector::default().with(Feature::TravelTime, travel).with(Feature::QcBoundTrucks, trucks)
    }

    fn ctx(index: usize, seed: u64) -> DecisionContext {
        DecisionContext { index, time: 0.0, truck: TruckId(0), seed }
    }

    fn ids(v: &[usize]) -> Vec<TaskId> {
        v.iter().map(|&i| TaskId(i)).collect()
    }

    fn argmax<D: Dispatcher>(d: &D, c: &DecisionContext, tasks: &[TaskId], fvs: &[FeatureVector]) -> TaskId {
        let ranks = rank_candidates(d, c, tasks, fvs);
        tasks[ranks.iter().position(|&r| r == 1).unwrap()]
    }

    #[test]
    fn manual_rule_branches() {
        let p = ManualHeuristic::new(4.0, 3.0, 6.0);
        assert_eq!(manual_heuristic(&p, &fv(100.0, 2.0)), -100.0);
        assert_eq!(manual_heuristic(&p, &fv(100.0, 5.0)), 400.0);
        assert_eq!(manual_heuristic(&p, &fv(100.0, 6.0)), 200_400.0);
        let c = ctx(0, 0);
        assert_eq!(p.score(&c, TaskId(0), &fv(100.0, 6.0)), -200_400.0);
    }

    #[test]
    fn manual_rule_avoids_saturated_cranes() {
        let p = ManualHeuristic::new(2.0, 1.0, 4.0);
        let tasks = ids(&[0, 1]);
        let fvs = [fv(10.0, 4.0), fv(300.0, 3.0)];
        assert_eq!(argmax(&p, &ctx(0, 0), &tasks, &fvs), TaskId(1));
    }

    #[test]
    fn default_parameters_follow_fleet() {
        let inst = gen_instance(1, &GeneratorConfig::desk()).unwrap();
        let p = ManualHeuristic::for_instance(&inst);
        assert_eq!((p.desired_trucks, p.priority, p.truck_limit), (3.0, 1.0, 6.0));
    }

    #[test]
    fn baseline_choices() {
        let c = ctx(0, 0);
        let tasks = ids(&[0, 1, 2]);
        let fvs = [fv(50.0, 0.0), fv(120.0, 0.0), fv(80.0, 0.0)];
        assert_eq!(argmax(&Baseline::Stt, &c, &tasks, &fvs), TaskId(0));

        let tasks = ids(&[7, 2, 9]);
        assert_eq!(argmax(&Baseline::Fifo, &c, &tasks, &fvs), TaskId(2));

        let remain = |r: f64| FeatureVector::default().with(Feature::QcRemainingTasks, r);
        let fvs = [remain(3.0), remain(8.0), remain(5.0)];
        assert_eq!(argmax(&Baseline::Mtr, &c, &tasks, &fvs), TaskId(2));
        assert_eq!("mtr".parse::<Baseline>(), Ok(Baseline::Mtr));
    }

    #[test]
    fn random_is_reproducible_and_spread() {
        let tasks = ids(&[0, 1, 2, 3]);
        let fvs = [FeatureVector::default(); 4];
        let picks = |seed| (0..400).map(|k| argmax(&Baseline::Random, &ctx(k, seed), &tasks, &fvs)).collect::<Vec<_>>();
        let a = picks(11);
        assert_eq!(a, picks(11));
        assert_ne!(a, picks(12));
        for t in &tasks {
            let n = a.iter().filter(|&x| x == t).count();
            assert!((60..=140).contains(&n), "task {t} picked {n} of 400");
        }
    }

    #[test]
    fn ranking() {
        assert_eq!(rank_by_score(&ids(&[0, 1, 2]), &[3.0, 1.0, 2.0]), vec![1, 3, 2]);
        assert_eq!(rank_by_score(&ids(&[4, 2, 9]), &[1.0, 1.0, 1.0]), vec![2, 1, 3]);
    }

    #[test]
    fn identical_rankings_maximise_covariance() {
        let p = ManualHeuristic::new(2.0, 1.0, 4.0);
        let tasks = ids(&[0, 1, 2]);
        let fvs = [fv(10.0, 0.0), fv(30.0, 3.0), fv(20.0, 1.0)];
        let c = ctx(0, 0);
        let om = rank_candidates(&p, &c, &tasks, &fvs);
        let same = |x: &FeatureVector| -manual_heuristic(&p, x);
        let scores: Vec<f64> = fvs.iter().map(same).collect();
        let or = rank_by_score(&tasks, &scores);
        assert_eq!(or, om);
        // variance of a permutation of 1..=3
        assert!((rank_covariance(&or, &om) - 2.0 / 3.0).abs() < 1e-15);
        let mut rev = om.clone();
        rev.iter_mut().for_each(|r| *r = 4 - *r);
        assert!(rank_covariance(&rev, &om) < rank_covariance(&om, &om));
    }

    struct Scaled<'a>(&'a ExprTree, f64);
    impl Dispatcher for Scaled<'_> {
        fn score(&self, c: &DecisionContext, t: TaskId, x: &FeatureVector) -> f64 {
            self.1 * self.0.score(c, t, x)
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn positive_scaling_keeps_choices(
            tree in crate::expr::tests::arb_tree(),
            scale in 1e-3..1e3f64,
            seed in 0..1000u64,
        ) {
            let cfg = GeneratorConfig { tasks: 30, ..GeneratorConfig::desk() };
            let inst = gen_instance(seed, &cfg).unwrap();
            let opts = SimOptions { record_decisions: true };
            let a = simulate(&inst, &tree, seed, opts).unwrap();
            let b = simulate(&inst, &Scaled(&tree, scale), seed, opts).unwrap();
            prop_assert_eq!(a.decision_count, 30);
            // scaling may only matter where products hit the float range
            let tame = a.decisions.iter().all(|d| d.scores.iter().all(|s| s.abs() < 1e300));
            if tame {
                let ca: Vec<_> = a.decisions.iter().map(|d| d.chosen).collect();
                let cb: Vec<_> = b.decisions.iter().map(|d| d.chosen).collect();
                prop_assert_eq!(ca, cb);
            }
        }
    }
}
