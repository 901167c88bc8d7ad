//! Target selection, attack metrics, experiment drivers and synthetic
//! networks for evaluating the attacks.

mod experiment;
mod report;
mod select;
mod synthetic;

pub use experiment::{attack_all, link_auc, run_experiment, run_experiment_with, run_history_sweep, split, ExperimentPlan, Split};
pub use report::{
    aml, asr, gain, read_json, render_table, write_flips_csv, write_json, write_runtime_csv, write_summary_csv,
    AttackReport, ReportMeta, TargetRecord,
};
pub use select::{select_targets, Strategy, TargetSelection};
pub use synthetic::{generate_synthetic, Generator, SyntheticSpec};

use thiserror::Error;

use crate::attack::AttackError;
use crate::ddne::ModelError;
use crate::dynnet::NetError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("no attackable target links")]
    NoTargets,
    #[error("cannot compare reports: {0}")]
    Mismatch(String),
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error("incompatible model: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("report CSV: {0}")]
    Csv(#[from] csv::Error),
}
