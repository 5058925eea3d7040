//! Experiment plans: which methods run on which instance sets, how often.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ExperimentError, GeneratorConfig};
use crate::gp::GpConfig;
use crate::hybrid::HybridConfig;
use crate::nn::{PolicyConfig, PolicyKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Manual,
    Random,
    Fifo,
    Stt,
    Mtr,
    Lgp,
    Gprr,
    Gprt,
    GprrStar,
    GprtStar,
    RnnStandalone,
    TransformerStandalone,
}

impl Method {
    pub const ALL: [Method; 12] = [
        Method::Manual,
        Method::Random,
        Method::Fifo,
        Method::Stt,
        Method::Mtr,
        Method::Lgp,
        Method::Gprr,
        Method::Gprt,
        Method::GprrStar,
        Method::GprtStar,
        Method::RnnStandalone,
        Method::TransformerStandalone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Manual => "manual",
            Method::Random => "random",
            Method::Fifo => "fifo",
            Method::Stt => "stt",
            Method::Mtr => "mtr",
            Method::Lgp => "lgp",
            Method::Gprr => "gprr",
            Method::Gprt => "gprt",
            Method::GprrStar => "gprr_star",
            Method::GprtStar => "gprt_star",
            Method::RnnStandalone => "rnn_standalone",
            Method::TransformerStandalone => "transformer_standalone",
        }
    }

    /// Methods that search for an expression on the training set.
    pub fn is_learned(self) -> bool {
        !matches!(self, Method::Manual | Method::Random | Method::Fifo | Method::Stt | Method::Mtr)
    }

    /// Hybrid variants: policy kind and whether seeding is on.
    pub fn hybrid(self) -> Option<(PolicyKind, bool)> {
        match self {
            Method::Gprr => Some((PolicyKind::Lstm, true)),
            Method::Gprt => Some((PolicyKind::Transformer, true)),
            Method::GprrStar => Some((PolicyKind::Lstm, false)),
            Method::GprtStar => Some((PolicyKind::Transformer, false)),
            _ => None,
        }
    }

    pub fn standalone(self) -> Option<PolicyKind> {
        match self {
            Method::RnnStandalone => Some(PolicyKind::Lstm),
            Method::TransformerStandalone => Some(PolicyKind::Transformer),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| ExperimentError::Plan(format!("unknown method `{s}`")))
    }
}

/// Reduced sizes for runs on a single machine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeskOverrides {
    /// Population size (M).
    pub population_size: usize,
    /// GP generations per cycle (K).
    pub cycle_generations: usize,
    /// Policy seeds per cycle (N).
    pub seeds_per_cycle: usize,
    pub generations: usize,
    pub qcs: usize,
    pub ycs: usize,
    pub trucks: usize,
    pub tasks: usize,
}

impl Default for DeskOverrides {
    fn default() -> Self {
        let g = GeneratorConfig::desk();
        Self {
            population_size: 64,
            cycle_generations: 5,
            seeds_per_cycle: 32,
            generations: 30,
            qcs: g.qcs,
            ycs: g.ycs,
            trucks: g.trucks,
            tasks: g.tasks,
        }
    }
}

impl DeskOverrides {
    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig::new(self.qcs, self.ycs, self.trucks, self.tasks)
    }
}

/// Algorithm settings shared by every learned method of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodSettings {
    pub gp: GpConfig,
    pub cycle_generations: usize,
    pub seeds_per_cycle: usize,
}

impl MethodSettings {
    pub fn full_scale() -> Self {
        let h = HybridConfig::full_scale(PolicyKind::Transformer);
        Self { gp: h.gp, cycle_generations: h.cycle_generations, seeds_per_cycle: h.seeds_per_cycle }
    }

    pub fn desk(o: &DeskOverrides) -> Self {
        let gp = GpConfig { population_size: o.population_size, generations: o.generations, ..GpConfig::desk() };
        Self { gp, cycle_generations: o.cycle_generations, seeds_per_cycle: o.seeds_per_cycle }
    }

    pub fn hybrid(&self, kind: PolicyKind, seeding: bool, seed: u64) -> HybridConfig {
        HybridConfig {
            gp: self.gp.clone(),
            cycle_generations: self.cycle_generations,
            seeds_per_cycle: self.seeds_per_cycle,
            total_generations: self.gp.generations,
            seeding_enabled: seeding,
            rng_seed: seed,
            ..HybridConfig::full_scale(kind)
        }
    }

    /// Samples granted to a standalone policy: one population per generation.
    pub fn standalone_budget(&self) -> usize {
        self.gp.population_size * (self.gp.generations + 1)
    }

    pub fn policy(&self, kind: PolicyKind) -> PolicyConfig {
        PolicyConfig { max_depth: self.gp.max_depth.min(PolicyConfig::of_kind(kind).max_depth), ..PolicyConfig::of_kind(kind) }
    }
}

/// On-disk plan layout; instance paths are relative to the plan file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    methods: Vec<String>,
    #[serde(default)]
    train: Vec<PathBuf>,
    #[serde(default)]
    test: Vec<PathBuf>,
    repetitions: usize,
    #[serde(default)]
    seeds: Vec<u64>,
    #[serde(default)]
    sign_tests: Vec<(String, String)>,
    #[serde(default)]
    desk: Option<DeskOverrides>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub methods: Vec<Method>,
    pub train: Vec<PathBuf>,
    pub test: Vec<PathBuf>,
    pub repetitions: usize,
    /// One seed per repetition; empty means `0..repetitions`.
    pub seeds: Vec<u64>,
    /// Method pairs compared with a paired sign test.
    pub sign_tests: Vec<(Method, Method)>,
    pub desk: DeskOverrides,
}

impl ExperimentPlan {
    pub fn new(methods: Vec<Method>, train: Vec<PathBuf>, test: Vec<PathBuf>, repetitions: usize) -> Self {
        Self { methods, train, test, repetitions, seeds: Vec::new(), sign_tests: Vec::new(), desk: DeskOverrides::default() }
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.repetitions as u64).collect()
        } else {
            self.seeds.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let err = |m: String| Err(ExperimentError::Plan(m));
        if self.methods.is_empty() {
            return err("no methods".into());
        }
        let mut seen = HashSet::new();
        if let Some(m) = self.methods.iter().find(|m| !seen.insert(**m)) {
            return err(format!("method `{m}` listed twice"));
        }
        if self.repetitions == 0 {
            return err("repetitions must be >= 1".into());
        }
        if !self.seeds.is_empty() && self.seeds.len() != self.repetitions {
            return err(format!("{} seeds for {} repetitions", self.seeds.len(), self.repetitions));
        }
        if self.train.is_empty() && self.test.is_empty() {
            return err("no instances".into());
        }
        if self.train.is_empty() && self.methods.iter().any(|m| m.is_learned()) {
            return err("learned methods need a training set".into());
        }
        let train: HashSet<&PathBuf> = self.train.iter().collect();
        if let Some(p) = self.test.iter().find(|p| train.contains(p)) {
            return err(format!("{} is in both the training and test sets", p.display()));
        }
        for (a, b) in &self.sign_tests {
            if let Some(m) = [a, b].into_iter().find(|m| !self.methods.contains(m)) {
                return err(format!("sign test names method `{m}` which is not run"));
            }
        }
        let d = &self.desk;
        if d.cycle_generations == 0 || d.population_size < 2 || d.seeds_per_cycle > d.population_size {
            return err("desk overrides need K >= 1, M >= 2 and N <= M".into());
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let file: PlanFile = toml::from_str(text).map_err(|e| ExperimentError::Plan(e.to_string()))?;
        let methods = file.methods.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
        let sign_tests = file
            .sign_tests
            .iter()
            .map(|(a, b)| Ok((a.parse()?, b.parse()?)))
            .collect::<Result<_, ExperimentError>>()?;
        let plan = Self {
            methods,
            train: file.train,
            test: file.test,
            repetitions: file.repetitions,
            seeds: file.seeds,
            sign_tests,
            desk: file.desk.unwrap_or_default(),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_toml(&self) -> String {
        let file = PlanFile {
            methods: self.methods.iter().map(|m| m.name().to_string()).collect(),
            train: self.train.clone(),
            test: self.test.clone(),
            repetitions: self.repetitions,
            seeds: self.seeds.clone(),
            sign_tests: self.sign_tests.iter().map(|(a, b)| (a.name().into(), b.name().into())).collect(),
            desk: Some(self.desk.clone()),
        };
        toml::to_string(&file).expect("plan serializes")
    }

    /// Reads a plan and resolves instance paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let mut plan = Self::from_toml(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in plan.train.iter_mut().chain(plan.test.iter_mut()) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(plan)
    }
}
