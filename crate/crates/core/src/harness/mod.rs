//! Run configuration, datasets, report files and the `failout` command line.

mod cli;
mod config;
mod dataset;
mod report;

pub use cli::{
    exit_code, run, train_model, write_sweep_csv, Cli, Command, EvaluateResults, Precision, SimResults, TrainResults,
};
pub use config::{DatasetKind, DatasetSpec, EvalMode, FailoutMode, FailoutSpec, PlanRef, RunConfig, SweepOptions};
pub use dataset::{generate_synthetic, load_csv, load_dataset, normalize, split_dataset, write_csv};
pub use report::{read_report, write_json, LoadedModel, ModelArtifact, ReportFile, SCHEMA_VERSION};
