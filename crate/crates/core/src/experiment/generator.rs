//! Synthetic terminal instances.
//!
//! Quay cranes sit on a straight quay line, yard cranes on a block grid
//! behind it, the depot off to one side. Travel time is Manhattan road
//! distance over a fixed speed with a small per-pair jitter. Crane handling
//! times are drawn once per task from truncated normals, so every
//! dispatcher evaluated on the instance faces identical realizations.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::sim::{NodeId, NodeKind, SimError, TaskId, TaskKind, TaskSpec, TerminalInstance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub qcs: usize,
    pub ycs: usize,
    pub trucks: usize,
    pub tasks: usize,
    pub swap_window: usize,
    pub quay_op_mean: f64,
    pub yard_op_mean: f64,
    /// Standard deviation as a fraction of the mean.
    pub op_sd_fraction: f64,
    pub op_floor: f64,
    /// Truck speed in metres per second.
    pub speed: f64,
    /// Multiplicative travel-time jitter, uniform in `[0, jitter)`.
    pub jitter: f64,
}

impl GeneratorConfig {
    pub fn new(qcs: usize, ycs: usize, trucks: usize, tasks: usize) -> Self {
        Self {
            qcs,
            ycs,
            trucks,
            tasks,
            swap_window: 3,
            quay_op_mean: 90.0,
            yard_op_mean: 120.0,
            op_sd_fraction: 0.25,
            op_floor: 10.0,
            speed: 6.0,
            jitter: 0.1,
        }
    }

    /// Two quay cranes, four yard cranes, six trucks, 100 tasks.
    pub fn desk() -> Self {
        Self::new(2, 4, 6, 100)
    }

    /// Ten quay cranes over two berths and a 4000-task work list.
    pub fn port_scale(trucks: usize) -> Self {
        Self::new(10, 20, trucks, 4000)
    }
}

/// Truncated normal by rejection below `floor`.
fn truncated_normal(rng: &mut impl Rng, mean: f64, sd: f64, floor: f64) -> f64 {
    let normal = Normal::new(mean, sd).expect("valid normal parameters");
    loop {
        let x = normal.sample(rng);
        if x >= floor {
            return x;
        }
    }
}

fn layout(cfg: &GeneratorConfig) -> Vec<(NodeKind, f64, f64)> {
    let mut nodes = vec![(NodeKind::Depot, -60.0, 200.0)];
    for i in 0..cfg.qcs {
        nodes.push((NodeKind::Quay { remote: false }, 60.0 + 80.0 * i as f64, 0.0));
    }
    for j in 0..cfg.ycs {
        let col = (j % 4) as f64;
        let row = (j / 4) as f64;
        nodes.push((NodeKind::Yard, 40.0 + 110.0 * col, 140.0 + 90.0 * row));
    }
    nodes
}

fn travel_matrix(rng: &mut impl Rng, coords: &[(NodeKind, f64, f64)], cfg: &GeneratorConfig) -> Vec<f64> {
    let n = coords.len();
    let mut travel = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let dist = (coords[i].1 - coords[j].1).abs() + (coords[i].2 - coords[j].2).abs();
                let jitter = 1.0 + cfg.jitter * rng.random::<f64>();
                travel[i * n + j] = (dist / cfg.speed * jitter).max(1.0);
            }
        }
    }
    travel
}

fn make_task(
    rng: &mut impl Rng,
    cfg: &GeneratorConfig,
    id: usize,
    qc: NodeId,
    yc: NodeId,
    kind: TaskKind,
) -> TaskSpec {
    let quay_op = truncated_normal(rng, cfg.quay_op_mean, cfg.quay_op_mean * cfg.op_sd_fraction, cfg.op_floor);
    let yard_op = truncated_normal(rng, cfg.yard_op_mean, cfg.yard_op_mean * cfg.op_sd_fraction, cfg.op_floor);
    let size = if rng.random_bool(0.5) { 1 } else { 2 };
    let (source, dest, d, h) = match kind {
        TaskKind::Unload => (qc, yc, quay_op, yard_op),
        TaskKind::Load => (yc, qc, yard_op, quay_op),
    };
    TaskSpec { id: TaskId(id), source, dest, kind, size, src_op_time: d, dst_op_time: h }
}

/// Generates a terminal instance; identical seeds give identical instances.
pub fn gen_instance(seed: u64, cfg: &GeneratorConfig) -> Result<TerminalInstance, SimError> {
    if cfg.qcs == 0 || cfg.ycs == 0 || cfg.trucks == 0 || cfg.tasks == 0 {
        return Err(SimError::InvalidInstance("qcs, ycs, trucks and tasks must all be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = layout(cfg);
    for node in coords.iter_mut().filter(|n| n.0.is_quay()) {
        node.0 = NodeKind::Quay { remote: rng.random_bool(0.5) };
    }
    let travel = travel_matrix(&mut rng, &coords, cfg);
    let tasks = (0..cfg.tasks)
        .map(|i| {
            let qc = NodeId(1 + rng.random_range(0..cfg.qcs));
            let yc = NodeId(1 + cfg.qcs + rng.random_range(0..cfg.ycs));
            let kind = if rng.random_bool(0.5) { TaskKind::Unload } else { TaskKind::Load };
            make_task(&mut rng, cfg, i, qc, yc, kind)
        })
        .collect();
    TerminalInstance::new(
        coords.into_iter().map(|c| c.0).collect(),
        travel,
        cfg.trucks,
        tasks,
        cfg.swap_window,
        seed,
    )
}

/// An instance in which every crane serves exactly one task, so trucks
/// never queue at a crane.
pub fn gen_contention_free(seed: u64, tasks: usize, trucks: usize) -> Result<TerminalInstance, SimError> {
    let cfg = GeneratorConfig::new(tasks, tasks, trucks, tasks);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = layout(&cfg);
    let travel = travel_matrix(&mut rng, &coords, &cfg);
    let mut yards: Vec<usize> = (0..tasks).collect();
    yards.shuffle(&mut rng);
    let specs = (0..tasks)
        .map(|i| {
            let qc = NodeId(1 + i);
            let yc = NodeId(1 + tasks + yards[i]);
            let kind = if rng.random_bool(0.5) { TaskKind::Unload } else { TaskKind::Load };
            make_task(&mut rng, &cfg, i, qc, yc, kind)
        })
        .collect();
    TerminalInstance::new(
        coords.into_iter().map(|c| c.0).collect(),
        travel,
        trucks,
        specs,
        cfg.swap_window,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_gives_identical_files() {
        let cfg = GeneratorConfig::desk();
        let a = gen_instance(11, &cfg).unwrap().to_toml();
        let b = gen_instance(11, &cfg).unwrap().to_toml();
        assert_eq!(a, b);
        let c = gen_instance(12, &cfg).unwrap().to_toml();
        assert_ne!(a, c);
    }

    #[test]
    fn desk_defaults() {
        let inst = gen_instance(1, &GeneratorConfig::desk()).unwrap();
        assert_eq!(inst.quay_cranes().count(), 2);
        assert_eq!(inst.yard_cranes().count(), 4);
        assert_eq!(inst.trucks(), 6);
        assert_eq!(inst.tasks().len(), 100);
        assert_eq!(inst.swap_window(), 3);
        assert!(inst.tasks().iter().all(|t| t.src_op_time >= 10.0 && t.dst_op_time >= 10.0));
    }

    #[test]
    fn port_scale_builds() {
        let inst = gen_instance(3, &GeneratorConfig::port_scale(50)).unwrap();
        assert_eq!(inst.quay_cranes().count(), 10);
        assert_eq!(inst.tasks().len(), 4000);
    }

    #[test]
    fn contention_free_uses_each_crane_once() {
        let inst = gen_contention_free(5, 6, 2).unwrap();
        let mut seen = std::collections::HashSet::new();
        for t in inst.tasks() {
            assert!(seen.insert(t.source));
            assert!(seen.insert(t.dest));
        }
    }

    #[test]
    fn rejects_zero_sizes() {
        assert!(gen_instance(1, &GeneratorConfig::new(0, 1, 1, 1)).is_err());
    }
}
