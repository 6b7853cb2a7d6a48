//! Experiment runner for the ranking-surrogate optimizer: configuration,
//! parallel seed fan-out, the random-search baseline and CSV reports.

pub mod config;
pub mod experiment;
pub mod trace;

pub use config::{parse_seeds, BenchmarkId, ExperimentConfig, Method, RunOverrides, UsageError};
pub use experiment::{random_search_baseline, run_experiment, run_forrester_study, ExperimentReport, JobReport};
