//! Event-driven dispatch loop.
//!
//! Trucks start idle at the depot. Whenever a truck is idle and dispatchable
//! tasks exist, every candidate is scored and the argmax is assigned. A task
//! then runs: empty drive to the source crane, queue, source handling, loaded
//! drive, queue, destination handling. Cranes serve one truck at a time in
//! arrival order, except that quay-crane unloads are held to the swap window.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::crane::within_swap_window;
use super::dispatch::{DecisionContext, Dispatcher};
use super::features::{Feature, FeatureVector};
use super::instance::{NodeId, TaskId, TaskKind, TerminalInstance, TruckId};
use super::schedule::{compute_teu_per_hour, Decision, SimResult, TaskRecord};
use super::SimError;

#[derive(Clone, Copy, Debug, Default)]
pub struct SimOptions {
    /// Keep the full per-decision log (candidates, features, scores).
    pub record_decisions: bool,
}

/// Runs one episode with the decision log enabled.
pub fn run_simulation(
    instance: &TerminalInstance,
    dispatcher: &dyn Dispatcher,
    seed: u64,
) -> Result<SimResult, SimError> {
    simulate(instance, dispatcher, seed, SimOptions { record_decisions: true })
}

pub fn simulate(
    instance: &TerminalInstance,
    dispatcher: &dyn Dispatcher,
    seed: u64,
    options: SimOptions,
) -> Result<SimResult, SimError> {
    let mut engine = Engine::new(instance, dispatcher, seed, options);
    engine.run()?;
    engine.finish()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Source,
    Dest,
}

#[derive(Clone, Copy, Debug)]
enum Event {
    ArriveSource(TaskId),
    ArriveDest(TaskId),
    OpDone(TaskId, Stage),
}

#[derive(Clone, Copy, Debug)]
struct Scheduled {
    time: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.seq.cmp(&other.seq))
    }
}

#[derive(Clone, Debug)]
struct Truck {
    location: NodeId,
    busy: bool,
    idle_since: f64,
    last_task: Option<TaskId>,
}

#[derive(Clone, Copy, Debug)]
struct Waiting {
    task: TaskId,
    stage: Stage,
    arrived: f64,
}

#[derive(Clone, Debug, Default)]
struct Crane {
    busy: bool,
    waiting: Vec<Waiting>,
    ops_done: u32,
    op_time_sum: f64,
    /// Quay cranes only: trucks assigned to a task here and not yet done.
    bound_trucks: u32,
    /// Quay cranes only: tasks here not yet completed.
    remaining: u32,
    /// Quay cranes only: unload tasks in instruction order.
    unloads: Vec<TaskId>,
    unload_served: Vec<bool>,
    first_unserved: usize,
}

#[derive(Clone, Debug, Default)]
struct Progress {
    truck: Option<TruckId>,
    predecessor: Option<TaskId>,
    dispatched_at: f64,
    start: f64,
    source_start: f64,
    source_end: f64,
    dest_arrival: f64,
    dest_start: f64,
    end: f64,
    done: bool,
}

struct Engine<'a> {
    inst: &'a TerminalInstance,
    dispatcher: &'a dyn Dispatcher,
    seed: u64,
    options: SimOptions,
    now: f64,
    seq: u64,
    events: BinaryHeap<Reverse<Scheduled>>,
    trucks: Vec<Truck>,
    cranes: Vec<Crane>,
    progress: Vec<Progress>,
    /// Unload rank of each task at its quay crane.
    unload_rank: Vec<Option<usize>>,
    unassigned: Vec<TaskId>,
    dispatch_order: Vec<TaskId>,
    decisions: Vec<Decision>,
    decision_count: usize,
    completed: usize,
    /// Fallback average handling time per crane kind, before a crane has
    /// finished any operation of its own.
    default_quay_op: f64,
    default_yard_op: f64,
}

impl<'a> Engine<'a> {
    fn new(
        inst: &'a TerminalInstance,
        dispatcher: &'a dyn Dispatcher,
        seed: u64,
        options: SimOptions,
    ) -> Self {
        let n = inst.tasks().len();
        let mut cranes = vec![Crane::default(); inst.node_count()];
        let mut unload_rank = vec![None; n];
        let (mut q_sum, mut q_cnt, mut y_sum, mut y_cnt) = (0.0, 0u32, 0.0, 0u32);
        for t in inst.tasks() {
            let qc = t.quay();
            cranes[qc.0].remaining += 1;
            if t.kind == TaskKind::Unload {
                unload_rank[t.id.0] = Some(cranes[qc.0].unloads.len());
                cranes[qc.0].unloads.push(t.id);
                cranes[qc.0].unload_served.push(false);
            }
            for (node, op) in [(t.source, t.src_op_time), (t.dest, t.dst_op_time)] {
                if inst.kind(node).is_quay() {
                    q_sum += op;
                    q_cnt += 1;
                } else {
                    y_sum += op;
                    y_cnt += 1;
                }
            }
        }
        let mean = |s: f64, c: u32| if c == 0 { 0.0 } else { s / f64::from(c) };
        Engine {
            inst,
            dispatcher,
            seed,
            options,
            now: 0.0,
            seq: 0,
            events: BinaryHeap::new(),
            trucks: vec![
                Truck { location: inst.depot(), busy: false, idle_since: 0.0, last_task: None };
                inst.trucks()
            ],
            cranes,
            progress: vec![Progress::default(); n],
            unload_rank,
            unassigned: inst.tasks().iter().map(|t| t.id).collect(),
            dispatch_order: Vec::with_capacity(n),
            decisions: Vec::new(),
            decision_count: 0,
            completed: 0,
            default_quay_op: mean(q_sum, q_cnt),
            default_yard_op: mean(y_sum, y_cnt),
        }
    }

    fn schedule(&mut self, time: f64, event: Event) {
        self.seq += 1;
        self.events.push(Reverse(Scheduled { time, seq: self.seq, event }));
    }

    fn run(&mut self) -> Result<(), SimError> {
        self.dispatch_idle()?;
        while let Some(Reverse(next)) = self.events.pop() {
            self.now = next.time;
            match next.event {
                Event::ArriveSource(t) => {
                    self.progress[t.0].start = self.now;
                    let node = self.inst.task(t).source;
                    self.enqueue(node, t, Stage::Source);
                }
                Event::ArriveDest(t) => {
                    self.progress[t.0].dest_arrival = self.now;
                    let node = self.inst.task(t).dest;
                    self.enqueue(node, t, Stage::Dest);
                }
                Event::OpDone(t, stage) => self.finish_op(t, stage),
            }
            self.dispatch_idle()?;
        }
        if self.completed != self.inst.tasks().len() {
            return Err(SimError::Stalled { completed: self.completed, time: self.now });
        }
        Ok(())
    }

    fn enqueue(&mut self, node: NodeId, task: TaskId, stage: Stage) {
        self.cranes[node.0].waiting.push(Waiting { task, stage, arrived: self.now });
        self.try_start(node);
    }

    fn is_gated_unload(&self, node: NodeId, w: &Waiting) -> bool {
        w.stage == Stage::Source && self.inst.kind(node).is_quay() && self.unload_rank[w.task.0].is_some()
    }

    fn try_start(&mut self, node: NodeId) {
        let crane = &self.cranes[node.0];
        if crane.busy || crane.waiting.is_empty() {
            return;
        }
        let q = self.inst.swap_window();
        let pick = crane
            .waiting
            .iter()
            .enumerate()
            .filter(|(_, w)| {
                !self.is_gated_unload(node, w)
                    || within_swap_window(
                        self.unload_rank[w.task.0].unwrap(),
                        crane.first_unserved,
                        q,
                    )
            })
            .min_by(|(_, a), (_, b)| a.arrived.total_cmp(&b.arrived).then(a.task.cmp(&b.task)))
            .map(|(i, _)| i);
        let Some(i) = pick else { return };
        let w = self.cranes[node.0].waiting.remove(i);
        let task = self.inst.task(w.task);
        let gated = self.is_gated_unload(node, &w);
        let crane = &mut self.cranes[node.0];
        crane.busy = true;
        let duration = match w.stage {
            Stage::Source => {
                self.progress[w.task.0].source_start = self.now;
                task.src_op_time
            }
            Stage::Dest => {
                self.progress[w.task.0].dest_start = self.now;
                task.dst_op_time
            }
        };
        if gated {
            let rank = self.unload_rank[w.task.0].unwrap();
            crane.unload_served[rank] = true;
            while crane.first_unserved < crane.unloads.len() && crane.unload_served[crane.first_unserved] {
                crane.first_unserved += 1;
            }
        }
        self.schedule(self.now + duration, Event::OpDone(w.task, w.stage));
    }

    fn finish_op(&mut self, t: TaskId, stage: Stage) {
        let task = self.inst.task(t);
        let node = match stage {
            Stage::Source => task.source,
            Stage::Dest => task.dest,
        };
        let crane = &mut self.cranes[node.0];
        crane.busy = false;
        crane.ops_done += 1;
        let p = &mut self.progress[t.0];
        match stage {
            Stage::Source => {
                p.source_end = self.now;
                crane.op_time_sum += task.src_op_time;
                let arrive = self.now + self.inst.travel(task.source, task.dest);
                self.schedule(arrive, Event::ArriveDest(t));
            }
            Stage::Dest => {
                p.end = self.now;
                p.done = true;
                crane.op_time_sum += task.dst_op_time;
                self.completed += 1;
                let qc = &mut self.cranes[task.quay().0];
                qc.bound_trucks -= 1;
                qc.remaining -= 1;
                let truck = p.truck.expect("completed task has a truck");
                let tr = &mut self.trucks[truck.0];
                tr.busy = false;
                tr.location = task.dest;
                tr.idle_since = self.now;
            }
        }
        self.try_start(node);
    }

    fn eligible(&self, t: TaskId) -> bool {
        match self.unload_rank[t.0] {
            Some(rank) => {
                let crane = &self.cranes[self.inst.task(t).source.0];
                within_swap_window(rank, crane.first_unserved, self.inst.swap_window())
            }
            None => true,
        }
    }

    fn avg_op_time(&self, node: NodeId) -> f64 {
        let c = &self.cranes[node.0];
        if c.ops_done > 0 {
            c.op_time_sum / f64::from(c.ops_done)
        } else if self.inst.kind(node).is_quay() {
            self.default_quay_op
        } else {
            self.default_yard_op
        }
    }

    fn dispatch_idle(&mut self) -> Result<(), SimError> {
        loop {
            let Some(truck) = self
                .trucks
                .iter()
                .enumerate()
                .filter(|(_, t)| !t.busy)
                .min_by(|(ia, a), (ib, b)| a.idle_since.total_cmp(&b.idle_since).then(ia.cmp(ib)))
                .map(|(i, _)| TruckId(i))
            else {
                return Ok(());
            };
            let candidates: Vec<TaskId> =
                self.unassigned.iter().copied().filter(|&t| self.eligible(t)).collect();
            if candidates.is_empty() {
                return Ok(());
            }
            let chosen = self.decide(truck, &candidates)?;
            self.assign(truck, chosen);
        }
    }

    fn decide(&mut self, truck: TruckId, candidates: &[TaskId]) -> Result<TaskId, SimError> {
        let inst = self.inst;
        let n_nodes = inst.node_count();
        // Per-quay-crane aggregates for this decision.
        let mut available = vec![0u32; n_nodes];
        for &t in candidates {
            available[inst.task(t).quay().0] += 1;
        }
        let mut next_kind: Vec<Option<TaskKind>> = vec![None; n_nodes];
        for &t in &self.unassigned {
            let task = inst.task(t);
            let slot = &mut next_kind[task.quay().0];
            if slot.is_none() {
                *slot = Some(task.kind);
            }
        }
        let idle = self.trucks.iter().filter(|t| !t.busy).count() as f64;
        let location = self.trucks[truck.0].location;
        let ctx = DecisionContext { index: self.decision_count, time: self.now, truck, seed: self.seed };

        let mut best: Option<(TaskId, f64)> = None;
        let record = self.options.record_decisions;
        let mut features_log = Vec::new();
        let mut scores_log = Vec::new();
        for &t in candidates {
            let task = inst.task(t);
            let qc = task.quay();
            let crane = &self.cranes[qc.0];
            let mut fv = FeatureVector::default();
            fv.set(Feature::TravelTime, inst.travel(location, task.source));
            fv.set(Feature::QcBoundTrucks, f64::from(crane.bound_trucks));
            fv.set(Feature::QcRemainingTasks, f64::from(crane.remaining));
            fv.set(Feature::QcAvailableTasks, f64::from(available[qc.0]));
            fv.set(
                Feature::QcWorkingStatus,
                if next_kind[qc.0] == Some(TaskKind::Load) { 1.0 } else { 0.0 },
            );
            let remote = matches!(inst.kind(qc), super::NodeKind::Quay { remote: true });
            fv.set(Feature::QcType, if remote { 1.0 } else { 0.0 });
            fv.set(Feature::SrcWaitingTrucks, self.cranes[task.source.0].waiting.len() as f64);
            fv.set(Feature::DstWaitingTrucks, self.cranes[task.dest.0].waiting.len() as f64);
            fv.set(Feature::SrcAvgOpTime, self.avg_op_time(task.source));
            fv.set(Feature::DstAvgOpTime, self.avg_op_time(task.dest));
            fv.set(Feature::TaskType, f64::from(task.kind.code()));
            fv.set(Feature::TaskSize, f64::from(task.size));
            fv.set(Feature::IdleTrucks, idle);
            fv.set(Feature::ElapsedTime, self.now);

            let score = self.dispatcher.score(&ctx, t, &fv);
            if !score.is_finite() {
                return Err(SimError::NonFiniteScore { decision: ctx.index, task: t, score });
            }
            // Candidates are in ascending id order, so strict `>` keeps the
            // smallest id on ties.
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((t, score));
            }
            if record {
                features_log.push(fv);
                scores_log.push(score);
            }
        }
        let chosen = best.expect("candidate list is non-empty").0;
        if record {
            self.decisions.push(Decision {
                index: ctx.index,
                time: self.now,
                truck,
                candidates: candidates.to_vec(),
                features: features_log,
                scores: scores_log,
                chosen,
            });
        }
        self.decision_count += 1;
        Ok(chosen)
    }

    fn assign(&mut self, truck: TruckId, t: TaskId) {
        let pos = self.unassigned.iter().position(|&u| u == t).expect("task is unassigned");
        self.unassigned.remove(pos);
        let task = self.inst.task(t);
        let tr = &mut self.trucks[truck.0];
        tr.busy = true;
        let p = &mut self.progress[t.0];
        p.truck = Some(truck);
        p.predecessor = tr.last_task;
        p.dispatched_at = self.now;
        tr.last_task = Some(t);
        let arrive = self.now + self.inst.travel(tr.location, task.source);
        self.cranes[task.quay().0].bound_trucks += 1;
        self.dispatch_order.push(t);
        self.schedule(arrive, Event::ArriveSource(t));
    }

    fn finish(self) -> Result<SimResult, SimError> {
        let records: Vec<TaskRecord> = self
            .dispatch_order
            .iter()
            .map(|&t| {
                let p = &self.progress[t.0];
                TaskRecord {
                    task: t,
                    truck: p.truck.expect("dispatched"),
                    predecessor: p.predecessor,
                    dispatched_at: p.dispatched_at,
                    start: p.start,
                    source_start: p.source_start,
                    source_end: p.source_end,
                    dest_arrival: p.dest_arrival,
                    dest_start: p.dest_start,
                    end: p.end,
                }
            })
            .collect();
        let teu_per_hour = compute_teu_per_hour(&records, self.inst)?;
        let min_s = records.iter().map(|r| r.start).fold(f64::INFINITY, f64::min);
        let max_e = records.iter().map(|r| r.end).fold(f64::NEG_INFINITY, f64::max);
        Ok(SimResult {
            records,
            decisions: self.decisions,
            decision_count: self.decision_count,
            teu_per_hour,
            makespan: max_e - min_s,
        })
    }
}
