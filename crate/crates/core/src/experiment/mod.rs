//! Instance generation and experiment orchestration.

mod generator;
mod manifest;
mod plan;
mod report;
mod run;
mod stats;


use std::path::PathBuf;

pub use generator::{gen_contention_free, gen_instance, GeneratorConfig};
pub use manifest::{InstanceRecord, RunManifest};
pub use plan::{DeskOverrides, ExperimentPlan, Method, MethodSettings};
pub use report::{
    emit_training_curves, format_report, late_improvement, read_csv, read_training_curves, summarize, write_csv,
    CurvePoint, ResultRow, SignTestRow, SummaryRow, AVERAGE, RESULT_HEADER, SIGN_HEADER, SUMMARY_HEADER,
    TOKEN_HEADER,
};
pub use run::{
    budget_matched, learn, load_instances, run_experiment, score_fixed, score_tree, sign_tests, Block,
    BudgetMatched, ExperimentResults, InstanceEntry, LearnedRun,
};
pub use stats::{improvement, mean, sd, sign_test, SignTest};

use crate::gp::GpError;
use crate::hybrid::HybridError;
use crate::nn::NnError;
use crate::sim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("instance file {} does not exist", .0.display())]
    MissingInstance(PathBuf),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Hybrid(#[from] HybridError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
