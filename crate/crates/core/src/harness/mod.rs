//! Experiment orchestration: configs, the end-to-end pipeline, prior-bank
//! construction and report emission.
//!
//! Every random stream is derived from the config's master seed with
//! [`crate::seed::derive_seed`] and a fixed label (`"mab"`, `"cem"`,
//! `"exec"`, `"family"`, `"train/<garment>"`, ...), so a config plus seed
//! fixes every output byte.

pub mod config;
pub mod pipeline;
pub mod report;

pub use config::{ExperimentConfig, Method};
pub use pipeline::{
    build_prior_bank, compare, exec_stopping, plan_trajectory, run_pipeline,
    run_pipeline_with_bank, ExperimentReport, PriorBankRun, StoppingAnalysis, Summary,
};
pub use report::{emit_report, prior_bank_trials_csv, summary_json, trials_csv, TRIALS_HEADER};
