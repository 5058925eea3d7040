//! Container-terminal truck dispatch simulator.

mod crane;
mod dispatch;
mod engine;
mod enumerate;
mod features;
mod instance;
mod schedule;


pub use crane::{qc_swap_reorder, within_swap_window, PendingUnload};
pub use dispatch::{DecisionContext, Dispatcher, ScriptedDispatcher};
pub use engine::{run_simulation, simulate, SimOptions};
pub use enumerate::{enumerate_dispatch_sequences, Enumeration};
pub use features::{Feature, FeatureVector};
pub use instance::{NodeId, NodeKind, TaskId, TaskKind, TaskSpec, TerminalInstance, TruckId};
pub use schedule::{
    compute_teu_per_hour, compute_times, teu_per_hour, validate_schedule, CraneOrders, Decision,
    SimResult, TaskRecord, TimingError, Violation,
};

#[cfg(test)]
pub(crate) use instance::fixtures;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("dispatcher returned non-finite score {score} for {task} at decision {decision}")]
    NonFiniteScore { decision: usize, task: TaskId, score: f64 },
    #[error("schedule span is zero or negative")]
    DegenerateSpan,
    #[error("simulation stalled at t={time} with {completed} tasks completed")]
    Stalled { completed: usize, time: f64 },
    #[error("{0}")]
    Io(String),
}
