use super::features::FeatureVector;
use super::instance::{TaskId, TruckId};

/// What the engine knows about the decision being made, besides features.
#[derive(Clone, Copy, Debug)]
pub struct DecisionContext {
    /// 0-based index of the dispatch decision within the run.
    pub index: usize,
    pub time: f64,
    pub truck: TruckId,
    /// The run seed passed to the simulator.
    pub seed: u64,
}

/// Scores a candidate task for an idle truck. The engine assigns the
/// candidate with the highest score; ties go to the smallest task id.
///
/// Implementations must be pure functions of their arguments.
pub trait Dispatcher: Sync {
    fn score(&self, ctx: &DecisionContext, task: TaskId, features: &FeatureVector) -> f64;
}

impl<D: Dispatcher + ?Sized> Dispatcher for &D {
    fn score(&self, ctx: &DecisionContext, task: TaskId, features: &FeatureVector) -> f64 {
        (**self).score(ctx, task, features)
    }
}

impl<D: Dispatcher + ?Sized> Dispatcher for Box<D> {
    fn score(&self, ctx: &DecisionContext, task: TaskId, features: &FeatureVector) -> f64 {
        (**self).score(ctx, task, features)
    }
}

/// Replays a fixed task order: at decision `k` the `k`-th scripted task
/// scores 1 and everything else 0. Past the end of the script the smallest
/// task id wins.
#[derive(Clone, Debug, Default)]
pub struct ScriptedDispatcher {
    pub script: Vec<TaskId>,
}

impl ScriptedDispatcher {
    pub fn new(script: Vec<TaskId>) -> Self {
        Self { script }
    }
}

impl Dispatcher for ScriptedDispatcher {
    fn score(&self, ctx: &DecisionContext, task: TaskId, _: &FeatureVector) -> f64 {
        match self.script.get(ctx.index) {
            Some(&t) if t == task => 1.0,
            _ => 0.0,
        }
    }
}
