//! Seed fan-out over a worker pool, one trace file per (method, seed).

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use popbo::benchmarks::{forrester_ranking_study, RankingStudyConfig};
use popbo::{Objective, RegretTrace};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Method};
use crate::trace::{regenerate_summary, trace_file_name, write_trace_file};

/// Uniform random search with the same trace layout as the optimizer runs.
pub fn random_search_baseline(
    objective: &dyn Objective<f64>,
    budget: usize,
    seed: u64,
) -> popbo::Result<RegretTrace<f64>> {
    popbo::random_search(objective, budget, seed, true).map_err(|f| f.error)
}

/// Outcome of one (method, seed) job.
#[derive(Debug)]
pub struct JobReport {
    pub method: Method,
    pub seed: u64,
    pub path: PathBuf,
    pub evaluations: usize,
    /// Set when the run stopped early; the trace file holds the completed rows.
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub benchmark: String,
    pub jobs: Vec<JobReport>,
    pub summaries: Vec<PathBuf>,
}

impl ExperimentReport {
    pub fn failures(&self) -> impl Iterator<Item = &JobReport> {
        self.jobs.iter().filter(|j| j.error.is_some())
    }
}

fn run_one(
    cfg: &ExperimentConfig,
    objective: &dyn Objective<f64>,
    method: Method,
    seed: u64,
) -> (RegretTrace<f64>, Option<String>) {
    let bo = cfg.bo_config(method, seed);
    let result = match method {
        Method::RandomSearch => popbo::random_search(objective, bo.n_init + bo.n_iters, seed, bo.record_timing),
        _ => popbo::run(objective, &bo),
    };
    match result {
        Ok(trace) => (trace, None),
        Err(failure) => (failure.trace, Some(failure.error.to_string())),
    }
}

/// Runs every (method, seed) pair, writes each trace as soon as it finishes
/// and, after all jobs are done, regenerates one summary per method.
///
/// A run that fails part-way still writes the rows it completed; the failure
/// is reported in the returned [`JobReport`]. Only configuration and I/O
/// problems abort the whole experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let objective = cfg.objective()?;
    let benchmark = objective.name();
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let jobs: Vec<(Method, u64)> = cfg.methods.iter().flat_map(|&m| cfg.seeds.iter().map(move |&s| (m, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let reports = pool.install(|| {
        jobs.par_iter()
            .map(|&(method, seed)| -> Result<JobReport> {
                let (trace, error) = run_one(cfg, objective.as_ref(), method, seed);
                let path = dir.join(trace_file_name(&benchmark, method, seed));
                write_trace_file(&path, &trace, objective.as_ref())?;
                Ok(JobReport { method, seed, path, evaluations: trace.len(), error })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut summaries = Vec::new();
    for &method in &cfg.methods {
        summaries.push(regenerate_summary(&dir, &benchmark, method)?);
    }
    Ok(ExperimentReport { benchmark, jobs: reports, summaries })
}

/// Runs the Forrester ranking study for each seed and writes
/// `forrester_study.csv` with columns `seed,sigma,spearman`.
pub fn run_forrester_study(seeds: &[u64], sigmas: &[f64], out: &std::path::Path) -> Result<PathBuf> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let rows = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = RankingStudyConfig { seed, sigmas: sigmas.to_vec(), ..Default::default() };
            forrester_ranking_study::<f64>(&cfg).map(|r| (seed, r))
        })
        .collect::<popbo::Result<Vec<_>>>()?;
    let path = out.join("forrester_study.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["seed", "sigma", "spearman"])?;
    for (seed, study) in rows {
        for r in study {
            w.write_record([seed.to_string(), r.sigma.to_string(), r.spearman.to_string()])?;
        }
    }
    w.flush()?;
    Ok(path)
}
