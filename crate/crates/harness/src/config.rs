//! Experiment configuration: a TOML file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Context;
use popbo::{BenchmarkFunction, BoRunConfig, FunctionKind, Objective, TabularBenchmark};
use serde::{Deserialize, Serialize};

pub const OUT_ENV: &str = "POPBO_OUT";
pub const DEFAULT_OUT: &str = "results";

/// Initial design size for the 6-d Rosenbrock function.
pub const ROSENBROCK_N_INIT: usize = 30;

/// Misconfiguration that should surface as a usage error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PopboRlcb,
    PopboEri,
    RandomSearch,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::PopboRlcb, Method::PopboEri, Method::RandomSearch];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::PopboRlcb => "popbo-rlcb",
            Method::PopboEri => "popbo-eri",
            Method::RandomSearch => "random-search",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            UsageError(format!("unknown method `{s}` (expected popbo-rlcb, popbo-eri or random-search)"))
        })
    }
}

/// Optional per-run settings layered over the method defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOverrides {
    pub n_init: Option<usize>,
    pub n_iters: Option<usize>,
    pub q: Option<f64>,
    pub k_max: Option<usize>,
    pub beta: Option<f64>,
    pub restarts: Option<usize>,
    pub train_steps: Option<usize>,
    pub warm_start: Option<bool>,
    pub record_timing: Option<bool>,
}

impl RunOverrides {
    /// `other` wins wherever it is set.
    pub fn merge(&mut self, other: &RunOverrides) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(n_init, n_iters, q, k_max, beta, restarts, train_steps, warm_start, record_timing);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `forrester`, `branin`, `hartmann6`, `rosenbrock`, or `tabular:<csv path>`.
    pub benchmark: String,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub noise_sigma: f64,
    pub out: Option<PathBuf>,
    /// Parallel seed workers; 0 means one per available core.
    pub workers: usize,
    pub run: RunOverrides,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            benchmark: "branin".into(),
            methods: vec![Method::PopboEri],
            seeds: (0..10).collect(),
            noise_sigma: 0.0,
            out: None,
            workers: 0,
            run: RunOverrides::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, UsageError> {
        toml::from_str(text).map_err(|e| UsageError(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_toml(&text)?)
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        if self.seeds.is_empty() {
            return Err(UsageError("at least one seed is required".into()));
        }
        if self.methods.is_empty() {
            return Err(UsageError("at least one method is required".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(UsageError(format!("noise_sigma must be finite and >= 0, got {}", self.noise_sigma)));
        }
        BenchmarkId::parse(&self.benchmark)?;
        for &m in &self.methods {
            if m != Method::RandomSearch {
                self.bo_config(m, 0).validate().map_err(|e| UsageError(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Output directory: the configured one, else `$POPBO_OUT`, else `results`.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn objective(&self) -> anyhow::Result<Box<dyn Objective<f64>>> {
        BenchmarkId::parse(&self.benchmark)?.build(self.noise_sigma)
    }

    /// Paper defaults for `method` with the overrides applied.
    pub fn bo_config(&self, method: Method, seed: u64) -> BoRunConfig {
        let mut cfg = match method {
            Method::PopboEri => BoRunConfig::eri(),
            _ => BoRunConfig::r_lcb(),
        };
        cfg.seed = seed;
        let rosenbrock = BenchmarkFunction::<f64>::by_name(&self.benchmark)
            .is_some_and(|f| matches!(f.kind(), FunctionKind::Rosenbrock { .. }));
        if rosenbrock {
            cfg.n_init = ROSENBROCK_N_INIT;
        }
        let o = &self.run;
        if let Some(v) = o.n_init {
            cfg.n_init = v;
        }
        if let Some(v) = o.n_iters {
            cfg.n_iters = v;
        }
        if let Some(v) = o.q {
            cfg.acquisition.q = v;
        }
        if let Some(v) = o.k_max {
            cfg.acquisition.k_max = v;
        }
        if let Some(v) = o.beta {
            cfg.acquisition.beta = v;
        }
        if let Some(v) = o.restarts {
            cfg.acquisition.restarts = v;
        }
        if let Some(v) = o.train_steps {
            cfg.surrogate.steps = v;
        }
        if let Some(v) = o.warm_start {
            cfg.warm_start = v;
        }
        if let Some(v) = o.record_timing {
            cfg.record_timing = v;
        }
        cfg
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BenchmarkId {
    Function(String),
    Tabular(PathBuf),
}

impl BenchmarkId {
    pub fn parse(name: &str) -> Result<Self, UsageError> {
        if let Some(path) = name.strip_prefix("tabular:") {
            if path.is_empty() {
                return Err(UsageError("tabular benchmark needs a path: tabular:<file.csv>".into()));
            }
            return Ok(BenchmarkId::Tabular(PathBuf::from(path)));
        }
        match BenchmarkFunction::<f64>::by_name(name) {
            Some(_) => Ok(BenchmarkId::Function(name.to_string())),
            None => Err(UsageError(format!(
                "unknown benchmark `{name}` (expected forrester, branin, hartmann6, rosenbrock or tabular:<path>)"
            ))),
        }
    }

    pub fn build(&self, noise_sigma: f64) -> anyhow::Result<Box<dyn Objective<f64>>> {
        Ok(match self {
            BenchmarkId::Function(name) => {
                Box::new(BenchmarkFunction::<f64>::by_name(name).expect("validated name").with_noise(noise_sigma))
            }
            BenchmarkId::Tabular(path) => Box::new(
                TabularBenchmark::<f64>::from_path(path)
                    .with_context(|| format!("loading {}", path.display()))?
                    .with_noise(noise_sigma),
            ),
        })
    }
}

/// Parses `3`, `0-9` (inclusive) or comma-separated mixes like `0-4,7,9`.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, UsageError> {
    let bad = || UsageError(format!("invalid seed list `{spec}`"));
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}
