//! Exhaustive enumeration of dispatch sequences for tiny instances.

use super::dispatch::ScriptedDispatcher;
use super::engine::{simulate, SimOptions};
use super::instance::{TaskId, TerminalInstance};
use super::SimError;

#[derive(Clone, Debug, PartialEq)]
pub struct Enumeration {
    pub best_teu_per_hour: f64,
    /// Task chosen at each decision by the best sequence.
    pub best_script: Vec<TaskId>,
    /// Number of complete dispatch sequences explored.
    pub sequences: usize,
}

/// Explores every sequence of dispatch choices the engine can take and
/// returns the best throughput. Exponential in the task count; meant for
/// instances with a handful of tasks.
pub fn enumerate_dispatch_sequences(
    instance: &TerminalInstance,
    seed: u64,
) -> Result<Enumeration, SimError> {
    let mut best = Enumeration { best_teu_per_hour: f64::NEG_INFINITY, best_script: Vec::new(), sequences: 0 };
    let mut stack = vec![Vec::<TaskId>::new()];
    let opts = SimOptions { record_decisions: true };
    while let Some(prefix) = stack.pop() {
        let result = simulate(instance, &ScriptedDispatcher::new(prefix.clone()), seed, opts)?;
        if prefix.len() >= result.decisions.len() {
            best.sequences += 1;
            if result.teu_per_hour > best.best_teu_per_hour {
                best.best_teu_per_hour = result.teu_per_hour;
                best.best_script = prefix;
            }
            continue;
        }
        for &c in result.decisions[prefix.len()].candidates.iter().rev() {
            let mut next = prefix.clone();
            next.push(c);
            stack.push(next);
        }
    }
    Ok(best)
}
