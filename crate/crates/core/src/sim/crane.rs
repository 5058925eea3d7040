//! Quay-crane unloading order with a bounded swap window.
//!
//! Unloading tasks at a quay crane carry an instruction rank (their order in
//! the work list among that crane's unloads). The crane may serve them out of
//! order, but only within a window of `q` ranks anchored at the earliest
//! unserved one: with `q = 1` the order is strict.

use super::instance::TaskId;

/// Whether an unload of `rank` may start while `first_unserved` has not.
#[inline]
pub fn within_swap_window(rank: usize, first_unserved: usize, q: usize) -> bool {
    debug_assert!(rank >= first_unserved);
    rank - first_unserved < q
}

/// A truck waiting for an unloading task at a quay crane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendingUnload {
    pub task: TaskId,
    /// When the truck is at the crane and ready to be served.
    pub ready_at: f64,
}

/// Serving order of a set of pending unloads: repeatedly serve the earliest
/// ready truck among the window, ties to instruction order. Instruction
/// order is task-id order.
pub fn qc_swap_reorder(pending: &[PendingUnload], q: usize) -> Vec<TaskId> {
    assert!(q >= 1, "swap window must be at least 1");
    let mut queue = pending.to_vec();
    queue.sort_by_key(|p| p.task);
    let mut served = vec![false; queue.len()];
    let mut order = Vec::with_capacity(queue.len());
    let mut first = 0;
    while order.len() < queue.len() {
        while served[first] {
            first += 1;
        }
        let pick = (first..queue.len())
            .take_while(|&r| within_swap_window(r, first, q))
            .filter(|&r| !served[r])
            .min_by(|&a, &b| queue[a].ready_at.total_cmp(&queue[b].ready_at).then(a.cmp(&b)))
            .expect("window always holds the first unserved task");
        served[pick] = true;
        order.push(queue[pick].task);
    }
    order
}
