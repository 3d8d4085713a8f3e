//! Experiment orchestration: configuration, method × mask × steps sweeps,
//! the measurement-time model and CSV reporting.

mod config;
mod experiment;
mod report;
mod timebudget;

pub use config::{
    DataConfig, ExperimentConfig, Method, ModelOptions, SamplingOptions, TrainOptions, ALLOWED_STEPS,
};
pub use experiment::{
    cell_keys, ensure_checkpoint, load_dataset, loss_csv, run_experiment, timebudget_csv, timing_csv, Dataset,
    ExperimentReport,
};
pub use report::{
    emit_csv, parse_summary_csv, per_image_csv, summary_csv, Aggregate, CellKey, CellResult, ImageResult,
    SummaryRow,
};
pub use timebudget::{reference_t_d, time_to_reconstruct, TimeBudget, REFERENCE_T_D_20, REFERENCE_T_P};
