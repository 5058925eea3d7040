//! Realized schedules: per-task timing records, the throughput objective,
//! the closed-form timing recurrence and the constraint checker.

use std::collections::BTreeMap;
use std::fmt;

use super::crane::within_swap_window;
use super::features::FeatureVector;
use super::instance::{NodeId, TaskId, TaskKind, TerminalInstance, TruckId};
use super::SimError;

/// Timing of one task as executed by one truck.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskRecord {
    pub task: TaskId,
    pub truck: TruckId,
    /// Task served by the same truck immediately before this one.
    pub predecessor: Option<TaskId>,
    pub dispatched_at: f64,
    /// Arrival at the source crane (`s_i`).
    pub start: f64,
    pub source_start: f64,
    pub source_end: f64,
    pub dest_arrival: f64,
    pub dest_start: f64,
    /// Completion of the destination crane operation (`e_i`).
    pub end: f64,
}

/// One dispatch decision as seen by the dispatcher.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub index: usize,
    pub time: f64,
    pub truck: TruckId,
    pub candidates: Vec<TaskId>,
    pub features: Vec<FeatureVector>,
    pub scores: Vec<f64>,
    pub chosen: TaskId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    /// Assignment records in dispatch order.
    pub records: Vec<TaskRecord>,
    /// Empty unless decision recording was enabled.
    pub decisions: Vec<Decision>,
    /// Number of dispatch decisions taken, recorded or not.
    pub decision_count: usize,
    pub teu_per_hour: f64,
    pub makespan: f64,
}

impl SimResult {
    pub fn record(&self, task: TaskId) -> Option<&TaskRecord> {
        self.records.iter().find(|r| r.task == task)
    }

    /// `(S, E)` indexed by task id. Panics if a task has no record.
    pub fn start_end(&self, n_tasks: usize) -> (Vec<f64>, Vec<f64>) {
        let mut s = vec![f64::NAN; n_tasks];
        let mut e = vec![f64::NAN; n_tasks];
        for r in &self.records {
            s[r.task.0] = r.start;
            e[r.task.0] = r.end;
        }
        assert!(s.iter().all(|v| !v.is_nan()), "every task needs a record");
        (s, e)
    }

    /// Task sequence of every truck, in service order.
    pub fn truck_chains(&self, trucks: usize) -> Vec<Vec<TaskId>> {
        let mut chains = vec![Vec::new(); trucks];
        let mut recs: Vec<&TaskRecord> = self.records.iter().collect();
        recs.sort_by(|a, b| a.dispatched_at.total_cmp(&b.dispatched_at).then(a.task.cmp(&b.task)));
        for r in recs {
            chains[r.truck.0].push(r.task);
        }
        chains
    }

    /// Service order at every crane (by operation start time).
    pub fn crane_orders(&self, instance: &TerminalInstance) -> CraneOrders {
        let mut ops: BTreeMap<NodeId, Vec<(f64, TaskId)>> = BTreeMap::new();
        for r in &self.records {
            let task = instance.task(r.task);
            ops.entry(task.source).or_default().push((r.source_start, r.task));
            ops.entry(task.dest).or_default().push((r.dest_start, r.task));
        }
        ops.into_iter()
            .map(|(node, mut v)| {
                v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                (node, v.into_iter().map(|(_, t)| t).collect())
            })
            .collect()
    }
}

/// Service order of tasks at each crane.
pub type CraneOrders = BTreeMap<NodeId, Vec<TaskId>>;

/// TEU per hour: total TEU over the span `max(E) - min(S)` in hours.
pub fn compute_teu_per_hour(records: &[TaskRecord], instance: &TerminalInstance) -> Result<f64, SimError> {
    if records.is_empty() {
        return Err(SimError::DegenerateSpan);
    }
    let min_s = records.iter().map(|r| r.start).fold(f64::INFINITY, f64::min);
    let max_e = records.iter().map(|r| r.end).fold(f64::NEG_INFINITY, f64::max);
    let teu: u64 = records.iter().map(|r| u64::from(instance.task(r.task).size)).sum();
    teu_per_hour(teu, max_e - min_s)
}

/// `teu / (span / 3600)`; the span must be positive.
pub fn teu_per_hour(teu: u64, span_seconds: f64) -> Result<f64, SimError> {
    if !(span_seconds > 0.0) || !span_seconds.is_finite() {
        return Err(SimError::DegenerateSpan);
    }
    Ok(teu as f64 / (span_seconds / 3600.0))
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TimingError {
    #[error("precedence cycle through task {0}")]
    Cycle(TaskId),
    #[error("task {0} is not covered by any truck chain")]
    Uncovered(TaskId),
    #[error("task {0} appears in more than one truck chain")]
    Duplicate(TaskId),
}

/// Closed-form start/end times from truck chains and crane orders.
///
/// `s_i` is the predecessor's end plus the empty drive to `a_i`, or the drive
/// from the depot for a truck's first task. `e_i` waits for the latest
/// immediate crane predecessor to finish, then adds source handling, the
/// loaded drive and destination handling. Queueing of trucks at a busy
/// crane is not modelled, so this matches the event engine exactly only
/// when no two tasks share a crane.
pub fn compute_times(
    instance: &TerminalInstance,
    chains: &[Vec<TaskId>],
    crane_orders: &CraneOrders,
) -> Result<(Vec<f64>, Vec<f64>), TimingError> {
    let n = instance.tasks().len();
    let mut truck_pred: Vec<Option<TaskId>> = vec![None; n];
    let mut covered = vec![false; n];
    for chain in chains {
        for (k, &t) in chain.iter().enumerate() {
            if covered[t.0] {
                return Err(TimingError::Duplicate(t));
            }
            covered[t.0] = true;
            truck_pred[t.0] = k.checked_sub(1).map(|p| chain[p]);
        }
    }
    if let Some(t) = covered.iter().position(|c| !c) {
        return Err(TimingError::Uncovered(TaskId(t)));
    }
    let mut crane_preds: Vec<Vec<TaskId>> = vec![Vec::new(); n];
    for order in crane_orders.values() {
        for w in order.windows(2) {
            if w[0] != w[1] {
                crane_preds[w[1].0].push(w[0]);
            }
        }
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let mut mark = vec![Mark::New; n];
    let mut s = vec![0.0; n];
    let mut e = vec![0.0; n];
    // Iterative post-order DFS over the precedence graph.
    for root in 0..n {
        if mark[root] == Mark::Done {
            continue;
        }
        let mut stack = vec![(root, false)];
        while let Some((i, expanded)) = stack.pop() {
            if expanded {
                let task = &instance.tasks()[i];
                s[i] = match truck_pred[i] {
                    Some(j) => e[j.0] + instance.travel(instance.task(j).dest, task.source),
                    None => instance.travel(instance.depot(), task.source),
                };
                let release = crane_preds[i]
                    .iter()
                    .map(|p| e[p.0])
                    .fold(0.0, f64::max);
                let loaded = s[i].max(release)
                    + task.src_op_time
                    + instance.travel(task.source, task.dest)
                    + task.dst_op_time;
                e[i] = loaded.max(release + task.src_op_time);
                mark[i] = Mark::Done;
                continue;
            }
            match mark[i] {
                Mark::Done => continue,
                Mark::Open => return Err(TimingError::Cycle(TaskId(i))),
                Mark::New => {}
            }
            mark[i] = Mark::Open;
            stack.push((i, true));
            for dep in truck_pred[i].iter().chain(crane_preds[i].iter()) {
                match mark[dep.0] {
                    Mark::Done => {}
                    Mark::Open => return Err(TimingError::Cycle(*dep)),
                    Mark::New => stack.push((dep.0, false)),
                }
            }
        }
    }
    Ok((s, e))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// A task is served by no truck or by several (exclusive assignment).
    Assignment { task: TaskId, trucks: Vec<TruckId> },
    /// A task has more than one immediate successor on its truck.
    Successors { task: TaskId, successors: Vec<TaskId> },
    /// Two operations overlap at one crane.
    CraneOverlap { crane: NodeId, first: TaskId, second: TaskId },
    /// A quay-crane unload was served too far ahead of an earlier one.
    SwapWindow { crane: NodeId, task: TaskId, passed: TaskId },
    /// Record timestamps are out of physical order.
    Timing { task: TaskId, detail: &'static str },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Assignment { task, trucks } => {
                write!(f, "exclusive assignment: {task} served by {} trucks", trucks.len())
            }
            Violation::Successors { task, successors } => {
                write!(f, "single successor: {task} followed by {successors:?}")
            }
            Violation::CraneOverlap { crane, first, second } => {
                write!(f, "crane order: {first} and {second} overlap at {crane}")
            }
            Violation::SwapWindow { crane, task, passed } => {
                write!(f, "crane order: unload {task} overtook {passed} beyond the swap window at {crane}")
            }
            Violation::Timing { task, detail } => write!(f, "timing: {task} {detail}"),
        }
    }
}

/// Checks exclusive assignment, single successors, crane serialization and
/// the quay-crane swap window. Returns every violation found.
pub fn validate_schedule(result: &SimResult, instance: &TerminalInstance) -> Vec<Violation> {
    let n = instance.tasks().len();
    let mut out = Vec::new();

    let mut by_task: Vec<Vec<TruckId>> = vec![Vec::new(); n];
    let mut successors: Vec<Vec<TaskId>> = vec![Vec::new(); n];
    for r in &result.records {
        by_task[r.task.0].push(r.truck);
        if let Some(p) = r.predecessor {
            successors[p.0].push(r.task);
        }
    }
    for (i, trucks) in by_task.into_iter().enumerate() {
        if trucks.len() != 1 {
            out.push(Violation::Assignment { task: TaskId(i), trucks });
        }
    }
    for (i, succ) in successors.into_iter().enumerate() {
        if succ.len() > 1 {
            out.push(Violation::Successors { task: TaskId(i), successors: succ });
        }
    }

    for r in &result.records {
        let detail = if r.start < r.dispatched_at {
            Some("arrives before it was dispatched")
        } else if r.source_start < r.start {
            Some("source operation starts before arrival")
        } else if r.source_end < r.source_start {
            Some("source operation ends before it starts")
        } else if r.dest_arrival < r.source_end {
            Some("arrives at destination before leaving the source")
        } else if r.dest_start < r.dest_arrival {
            Some("destination operation starts before arrival")
        } else if r.end < r.dest_start {
            Some("ends before destination operation starts")
        } else {
            None
        };
        if let Some(detail) = detail {
            out.push(Violation::Timing { task: r.task, detail });
        }
    }

    // Crane occupancy intervals.
    let mut ops: BTreeMap<NodeId, Vec<(f64, f64, TaskId)>> = BTreeMap::new();
    for r in &result.records {
        let task = instance.task(r.task);
        ops.entry(task.source).or_default().push((r.source_start, r.source_end, r.task));
        ops.entry(task.dest).or_default().push((r.dest_start, r.end, r.task));
    }
    for (crane, mut v) in ops {
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        for w in v.windows(2) {
            if w[1].0 < w[0].1 {
                out.push(Violation::CraneOverlap { crane, first: w[0].2, second: w[1].2 });
            }
        }
    }

    // Swap window for unloads at each quay crane.
    let q = instance.swap_window();
    for qc in instance.quay_cranes() {
        let unloads: Vec<TaskId> = instance
            .tasks()
            .iter()
            .filter(|t| t.kind == TaskKind::Unload && t.source == qc)
            .map(|t| t.id)
            .collect();
        let mut served: Vec<(f64, usize)> = result
            .records
            .iter()
            .filter_map(|r| {
                unloads.iter().position(|&u| u == r.task).map(|rank| (r.source_start, rank))
            })
            .collect();
        served.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut done = vec![false; unloads.len()];
        let mut first = 0;
        for (_, rank) in served {
            while first < done.len() && done[first] {
                first += 1;
            }
            if rank >= first && !within_swap_window(rank, first, q) {
                out.push(Violation::SwapWindow { crane: qc, task: unloads[rank], passed: unloads[first] });
            }
            done[rank] = true;
        }
    }
    out
}
