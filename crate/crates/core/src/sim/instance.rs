//! Terminal instances: crane graph, travel-time matrix, fleet size and the
//! work-instruction list.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TruckId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

impl fmt::Display for TruckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum NodeKind {
    Depot,
    /// Quay crane. `remote` marks remotely operated cranes.
    Quay {
        #[serde(default)]
        remote: bool,
    },
    Yard,
}

impl NodeKind {
    pub fn is_quay(self) -> bool {
        matches!(self, NodeKind::Quay { .. })
    }

    pub fn is_yard(self) -> bool {
        matches!(self, NodeKind::Yard)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    /// Yard to ship (`ty = 0`).
    Load,
    /// Ship to yard (`ty = 1`).
    Unload,
}

impl TaskKind {
    pub fn code(self) -> u8 {
        match self {
            TaskKind::Load => 0,
            TaskKind::Unload => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(TaskKind::Load),
            1 => Some(TaskKind::Unload),
            _ => None,
        }
    }
}

/// One transport job of the work-instruction list.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub id: TaskId,
    pub source: NodeId,
    pub dest: NodeId,
    pub kind: TaskKind,
    /// Container size in TEU (1 or 2).
    pub size: u8,
    /// Crane operation time at the source node (`d_i`).
    pub src_op_time: f64,
    /// Crane operation time at the destination node (`h_i`).
    pub dst_op_time: f64,
}

impl TaskSpec {
    /// Total crane handling time `r_i = d_i + h_i`.
    pub fn handling_time(&self) -> f64 {
        self.src_op_time + self.dst_op_time
    }

    /// The quay crane this task is served by, whichever end it sits on.
    pub fn quay(&self) -> NodeId {
        match self.kind {
            TaskKind::Unload => self.source,
            TaskKind::Load => self.dest,
        }
    }
}

/// A validated, immutable terminal description.
#[derive(Clone, Debug, PartialEq)]
pub struct TerminalInstance {
    nodes: Vec<NodeKind>,
    depot: NodeId,
    travel: Vec<f64>,
    trucks: usize,
    tasks: Vec<TaskSpec>,
    swap_window: usize,
    seed: u64,
}

impl TerminalInstance {
    /// Builds an instance and checks every structural invariant.
    ///
    /// `travel` is a dense row-major `nodes.len() x nodes.len()` matrix in
    /// seconds. Task ids must equal their position in `tasks`.
    pub fn new(
        nodes: Vec<NodeKind>,
        travel: Vec<f64>,
        trucks: usize,
        tasks: Vec<TaskSpec>,
        swap_window: usize,
        seed: u64,
    ) -> Result<Self, SimError> {
        let invalid = |msg: String| Err(SimError::InvalidInstance(msg));
        let n = nodes.len();
        let depots: Vec<usize> = nodes
            .iter()
            .enumerate()
            .filter(|(_, k)| matches!(k, NodeKind::Depot))
            .map(|(i, _)| i)
            .collect();
        if depots.len() != 1 {
            return invalid(format!("expected exactly one depot, found {}", depots.len()));
        }
        if travel.len() != n * n {
            return invalid(format!(
                "travel matrix has {} entries, expected {}x{}",
                travel.len(),
                n,
                n
            ));
        }
        for x in 0..n {
            for y in 0..n {
                let t = travel[x * n + y];
                if !t.is_finite() {
                    return invalid(format!("node n{y} unreachable from n{x}"));
                }
                if x == y && t != 0.0 {
                    return invalid(format!("travel time n{x} -> n{x} must be zero, got {t}"));
                }
                if x != y && t <= 0.0 {
                    return invalid(format!("travel time n{x} -> n{y} must be positive, got {t}"));
                }
            }
        }
        if trucks == 0 {
            return invalid("at least one truck is required".into());
        }
        if tasks.is_empty() {
            return invalid("at least one task is required".into());
        }
        if swap_window == 0 {
            return invalid("swap window q must be at least 1".into());
        }
        for (i, task) in tasks.iter().enumerate() {
            if task.id.0 != i {
                return invalid(format!("task at position {i} has id {}", task.id.0));
            }
            let (Some(src), Some(dst)) = (nodes.get(task.source.0), nodes.get(task.dest.0)) else {
                return invalid(format!("task {} references an unknown node", task.id));
            };
            let ok = match task.kind {
                TaskKind::Unload => src.is_quay() && dst.is_yard(),
                TaskKind::Load => src.is_yard() && dst.is_quay(),
            };
            if !ok {
                return invalid(format!(
                    "task {} must move between a quay crane and a yard crane in its stated direction",
                    task.id
                ));
            }
            if task.size != 1 && task.size != 2 {
                return invalid(format!("task {} has size {} TEU", task.id, task.size));
            }
            let positive = |v: f64| v.is_finite() && v > 0.0;
            if !positive(task.src_op_time) || !positive(task.dst_op_time) {
                return invalid(format!("task {} has a non-positive operation time", task.id));
            }
        }
        Ok(Self {
            nodes,
            depot: NodeId(depots[0]),
            travel,
            trucks,
            tasks,
            swap_window,
            seed,
        })
    }

    pub fn nodes(&self) -> &[NodeKind] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn kind(&self, node: NodeId) -> NodeKind {
        self.nodes[node.0]
    }

    pub fn depot(&self) -> NodeId {
        self.depot
    }

    pub fn quay_cranes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, k)| k.is_quay())
            .map(|(i, _)| NodeId(i))
    }

    pub fn yard_cranes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, k)| k.is_yard())
            .map(|(i, _)| NodeId(i))
    }

    /// Travel time `tau(from, to)` in seconds.
    #[inline]
    pub fn travel(&self, from: NodeId, to: NodeId) -> f64 {
        self.travel[from.0 * self.nodes.len() + to.0]
    }

    pub fn travel_matrix(&self) -> &[f64] {
        &self.travel
    }

    pub fn trucks(&self) -> usize {
        self.trucks
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn task(&self, id: TaskId) -> &TaskSpec {
        &self.tasks[id.0]
    }

    pub fn swap_window(&self) -> usize {
        self.swap_window
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn total_teu(&self) -> u64 {
        self.tasks.iter().map(|t| u64::from(t.size)).sum()
    }

    /// Same terminal and task list with a different fleet size.
    pub fn with_trucks(&self, trucks: usize) -> Result<Self, SimError> {
        Self::new(
            self.nodes.clone(),
            self.travel.clone(),
            trucks,
            self.tasks.clone(),
            self.swap_window,
            self.seed,
        )
    }

    /// Same terminal with a different swap window.
    pub fn with_swap_window(&self, q: usize) -> Result<Self, SimError> {
        Self::new(
            self.nodes.clone(),
            self.travel.clone(),
            self.trucks,
            self.tasks.clone(),
            q,
            self.seed,
        )
    }

    pub fn to_toml(&self) -> String {
        let file = InstanceFile::from(self);
        toml::to_string(&file).expect("instance serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let file: InstanceFile =
            toml::from_str(text).map_err(|e| SimError::InvalidInstance(e.to_string()))?;
        file.try_into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SimError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml())
            .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    seed: u64,
    q: usize,
    trucks: usize,
    /// Dense travel matrix in seconds, rows and columns in node-id order.
    travel: Vec<Vec<f64>>,
    nodes: Vec<NodeEntry>,
    tasks: Vec<TaskEntry>,
}

#[derive(Serialize, Deserialize)]
struct NodeEntry {
    id: usize,
    #[serde(flatten)]
    kind: NodeKind,
}

#[derive(Serialize, Deserialize)]
struct TaskEntry {
    id: usize,
    src: usize,
    dst: usize,
    ty: u8,
    size: u8,
    d: f64,
    h: f64,
}

impl From<&TerminalInstance> for InstanceFile {
    fn from(inst: &TerminalInstance) -> Self {
        let n = inst.node_count();
        InstanceFile {
            seed: inst.seed,
            q: inst.swap_window,
            trucks: inst.trucks,
            travel: inst.travel.chunks(n).map(<[f64]>::to_vec).collect(),
            nodes: inst
                .nodes
                .iter()
                .enumerate()
                .map(|(id, &kind)| NodeEntry { id, kind })
                .collect(),
            tasks: inst
                .tasks
                .iter()
                .map(|t| TaskEntry {
                    id: t.id.0,
                    src: t.source.0,
                    dst: t.dest.0,
                    ty: t.kind.code(),
                    size: t.size,
                    d: t.src_op_time,
                    h: t.dst_op_time,
                })
                .collect(),
        }
    }
}

impl TryFrom<InstanceFile> for TerminalInstance {
    type Error = SimError;

    fn try_from(file: InstanceFile) -> Result<Self, SimError> {
        let n = file.nodes.len();
        let mut nodes = Vec::with_capacity(n);
        for (pos, entry) in file.nodes.iter().enumerate() {
            if entry.id != pos {
                return Err(SimError::InvalidInstance(format!(
                    "node entries must be listed in id order (position {pos} has id {})",
                    entry.id
                )));
            }
            nodes.push(entry.kind);
        }
        if file.travel.len() != n || file.travel.iter().any(|row| row.len() != n) {
            return Err(SimError::InvalidInstance(format!(
                "travel matrix must be {n}x{n}"
            )));
        }
        let travel = file.travel.into_iter().flatten().collect();
        let mut tasks = Vec::with_capacity(file.tasks.len());
        for t in file.tasks {
            let kind = TaskKind::from_code(t.ty).ok_or_else(|| {
                SimError::InvalidInstance(format!("task {} has unknown type {}", t.id, t.ty))
            })?;
            tasks.push(TaskSpec {
                id: TaskId(t.id),
                source: NodeId(t.src),
                dest: NodeId(t.dst),
                kind,
                size: t.size,
                src_op_time: t.d,
                dst_op_time: t.h,
            });
        }
        TerminalInstance::new(nodes, travel, file.trucks, tasks, file.q, file.seed)
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn small() -> TerminalInstance {
        let (nodes, travel) = line_terminal(1, 1);
        TerminalInstance::new(
            nodes,
            travel,
            1,
            vec![task(0, 1, 2, TaskKind::Unload, 90.0, 120.0)],
            3,
            1,
        )
        .unwrap()
    }

    #[test]
    fn rejects_same_type_endpoints() {
        let (nodes, travel) = line_terminal(2, 1);
        let err = TerminalInstance::new(
            nodes,
            travel,
            1,
            vec![task(0, 1, 2, TaskKind::Unload, 1.0, 1.0)],
            3,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, SimError::InvalidInstance(_)));
    }

    #[test]
    fn rejects_unreachable_node() {
        let (nodes, mut travel) = line_terminal(1, 1);
        travel[1] = f64::INFINITY;
        let err = TerminalInstance::new(
            nodes,
            travel,
            1,
            vec![task(0, 1, 2, TaskKind::Unload, 1.0, 1.0)],
            3,
            0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("unreachable"), "{err}");
    }

    #[test]
    fn rejects_zero_window_and_empty_fleet() {
        let inst = small();
        assert!(inst.with_swap_window(0).is_err());
        assert!(inst.with_trucks(0).is_err());
    }

    #[test]
    fn toml_round_trip_is_exact() {
        let inst = small();
        let text = inst.to_toml();
        let back = TerminalInstance::from_toml(&text).unwrap();
        assert_eq!(inst, back);
        assert_eq!(text, back.to_toml());
    }
}
