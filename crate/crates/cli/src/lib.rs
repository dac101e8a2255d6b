//! Experiment harness: closed-loop runs over seeds and baselines, and HV-AUC reports.

pub mod error;
pub mod experiment;
pub mod plan;
pub mod report;

pub use error::CliError;
pub use experiment::{run, run_seed};
pub use plan::{detection_preset, CellMeta, ExperimentPlan, Transport};
pub use report::{cumulative_auc, load_cell, mean_auc, report, Cell, Report, SummaryRow};
