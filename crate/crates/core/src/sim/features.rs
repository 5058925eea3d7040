//! The 14 dispatch features observed for a (truck, candidate task) pair.

use std::fmt;
use std::ops::Index;

/// Feature terminals, in canonical order (`f1` .. `f14`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    /// Travel time from the truck's position to the task's source crane.
    TravelTime,
    /// Trucks currently bound to the task's quay crane.
    QcBoundTrucks,
    /// Tasks at the quay crane that are not yet completed.
    QcRemainingTasks,
    /// Tasks at the quay crane that can be dispatched right now.
    QcAvailableTasks,
    /// 1 when the quay crane's next instruction is a load, 0 for unload.
    QcWorkingStatus,
    /// 1 for a remotely operated quay crane.
    QcType,
    SrcWaitingTrucks,
    DstWaitingTrucks,
    SrcAvgOpTime,
    DstAvgOpTime,
    /// 1 unload, 0 load.
    TaskType,
    TaskSize,
    IdleTrucks,
    /// Seconds since the simulation started.
    ElapsedTime,
}

impl Feature {
    pub const COUNT: usize = 14;

    pub const ALL: [Feature; Feature::COUNT] = [
        Feature::TravelTime,
        Feature::QcBoundTrucks,
        Feature::QcRemainingTasks,
        Feature::QcAvailableTasks,
        Feature::QcWorkingStatus,
        Feature::QcType,
        Feature::SrcWaitingTrucks,
        Feature::DstWaitingTrucks,
        Feature::SrcAvgOpTime,
        Feature::DstAvgOpTime,
        Feature::TaskType,
        Feature::TaskSize,
        Feature::IdleTrucks,
        Feature::ElapsedTime,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Mnemonic used when writing heuristic files.
    pub fn name(self) -> &'static str {
        match self {
            Feature::TravelTime => "travel",
            Feature::QcBoundTrucks => "qc_trucks",
            Feature::QcRemainingTasks => "qc_remain",
            Feature::QcAvailableTasks => "qc_avail",
            Feature::QcWorkingStatus => "qc_status",
            Feature::QcType => "qc_type",
            Feature::SrcWaitingTrucks => "src_wait",
            Feature::DstWaitingTrucks => "dst_wait",
            Feature::SrcAvgOpTime => "src_op",
            Feature::DstAvgOpTime => "dst_op",
            Feature::TaskType => "task_type",
            Feature::TaskSize => "size",
            Feature::IdleTrucks => "idle",
            Feature::ElapsedTime => "elapsed",
        }
    }

    /// Accepts the mnemonic or the positional alias `f1` .. `f14`.
    pub fn parse(symbol: &str) -> Option<Self> {
        if let Some(n) = symbol.strip_prefix('f') {
            if let Ok(n) = n.parse::<usize>() {
                return n.checked_sub(1).and_then(Self::from_index);
            }
        }
        Self::ALL.iter().copied().find(|f| f.name() == symbol)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FeatureVector(pub [f64; Feature::COUNT]);

impl FeatureVector {
    pub fn get(&self, f: Feature) -> f64 {
        self.0[f.index()]
    }

    pub fn set(&mut self, f: Feature, v: f64) {
        self.0[f.index()] = v;
    }

    pub fn with(mut self, f: Feature, v: f64) -> Self {
        self.set(f, v);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Index<Feature> for FeatureVector {
    type Output = f64;

    fn index(&self, f: Feature) -> &f64 {
        &self.0[f.index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aliases_and_names_resolve() {
        for (i, f) in Feature::ALL.iter().enumerate() {
            assert_eq!(Feature::parse(&format!("f{}", i + 1)), Some(*f));
            assert_eq!(Feature::parse(f.name()), Some(*f));
            assert_eq!(f.index(), i);
        }
        assert_eq!(Feature::parse("f0"), None);
        assert_eq!(Feature::parse("f15"), None);
        assert_eq!(Feature::parse("speed"), None);
    }
}
