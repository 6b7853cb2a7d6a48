//! The optimization loop: initial design, then repeated rank / fit /
//! propose / evaluate rounds, with a per-evaluation trace.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{propose_next, AcquisitionConfig, AcquisitionKind};
use crate::benchmarks::Objective;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, substream, Purpose, Rng};
use crate::scalar::Scalar;
use crate::surrogate::{fit, IntensityModel, ObservationSet, TrainConfig, DEFAULT_HIDDEN};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoRunConfig {
    pub n_init: usize,
    pub n_iters: usize,
    pub seed: u64,
    pub surrogate: TrainConfig,
    pub acquisition: AcquisitionConfig,
    pub hidden: Vec<usize>,
    /// Keep the network parameters between rounds (ADAM moments always
    /// restart). When false every round trains a freshly initialized model.
    pub warm_start: bool,
    /// Record wall-clock seconds per phase; zeros when disabled.
    pub record_timing: bool,
}

impl BoRunConfig {
    pub fn new(acquisition: AcquisitionConfig) -> Self {
        Self {
            n_init: 12,
            n_iters: 80,
            seed: 0,
            surrogate: TrainConfig::default(),
            acquisition,
            hidden: DEFAULT_HIDDEN.to_vec(),
            warm_start: true,
            record_timing: true,
        }
    }

    pub fn r_lcb() -> Self {
        Self::new(AcquisitionConfig::r_lcb())
    }

    pub fn eri() -> Self {
        Self::new(AcquisitionConfig::eri())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_init < 2 {
            return Err(Error::Input(format!("n_init must be >= 2, got {}", self.n_init)));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Input("hidden widths must be positive".into()));
        }
        if self.acquisition.kind == AcquisitionKind::Eri && self.acquisition.k_max > self.n_init {
            return Err(Error::Input(format!(
                "k_max {} exceeds the {} initial observations",
                self.acquisition.k_max, self.n_init
            )));
        }
        self.surrogate.validate()?;
        self.acquisition.validate()
    }
}

/// One evaluation of the objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord<T> {
    /// 0-based evaluation index; the first `n_init` rows are the initial
    /// design.
    pub iter: usize,
    /// Queried point, normalized coordinates.
    pub x: Vec<T>,
    pub y: T,
    /// Best observation so far.
    pub incumbent: T,
    /// Noise-free value at the incumbent minus the known optimum.
    pub regret: Option<T>,
    pub fit_s: f64,
    pub propose_s: f64,
    pub eval_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace<T> {
    pub records: Vec<TraceRecord<T>>,
}

impl<T: Scalar> RegretTrace<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord<T>> {
        self.records.last()
    }

    pub fn final_regret(&self) -> Option<T> {
        self.last().and_then(|r| r.regret)
    }

    pub fn points(&self) -> impl Iterator<Item = &[T]> {
        self.records.iter().map(|r| r.x.as_slice())
    }
}

/// Best entry of a trace: the lowest observation, earliest on ties.
pub fn incumbent<T: Scalar>(trace: &RegretTrace<T>) -> Result<(Vec<T>, T)> {
    let mut best: Option<&TraceRecord<T>> = None;
    for r in &trace.records {
        if best.is_none_or(|b| r.y < b.y) {
            best = Some(r);
        }
    }
    best.map(|r| (r.x.clone(), r.y)).ok_or_else(|| Error::Precondition("empty trace".into()))
}

/// A run that stopped early; `trace` holds every completed evaluation.
#[derive(Debug)]
pub struct RunFailure<T> {
    pub trace: RegretTrace<T>,
    pub error: Error,
}

impl<T> fmt::Display for RunFailure<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run aborted after {} evaluations: {}", self.trace.records.len(), self.error)
    }
}

impl<T: fmt::Debug> std::error::Error for RunFailure<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Accumulates observations and trace rows.
struct Recorder<'a, T: Scalar, O: ?Sized> {
    objective: &'a O,
    optimum: Option<T>,
    noise: Rng,
    timing: bool,
    points: Vec<Vec<T>>,
    values: Vec<T>,
    best: Option<usize>,
    trace: RegretTrace<T>,
}

impl<'a, T: Scalar, O: Objective<T> + ?Sized> Recorder<'a, T, O> {
    fn new(objective: &'a O, seed: u64, timing: bool) -> Self {
        Self {
            objective,
            optimum: objective.optimum(),
            noise: substream(seed, Purpose::Noise, 0),
            timing,
            points: Vec::new(),
            values: Vec::new(),
            best: None,
            trace: RegretTrace::default(),
        }
    }

    fn seconds(&self, since: Instant) -> f64 {
        if self.timing {
            since.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }

    fn evaluate(&mut self, x: Vec<T>, fit_s: f64, propose_s: f64) -> Result<()> {
        let t0 = Instant::now();
        let y = self.objective.evaluate(&x, &mut self.noise)?;
        if !y.is_finite() {
            return Err(Error::Objective(format!("non-finite observation {y} at {x:?}")));
        }
        let eval_s = self.seconds(t0);
        if self.best.is_none_or(|b| y < self.values[b]) {
            self.best = Some(self.values.len());
        }
        self.points.push(x.clone());
        self.values.push(y);
        let best = self.best.unwrap();
        let regret = match self.optimum {
            Some(opt) => Some(self.objective.true_value(&self.points[best])? - opt),
            None => None,
        };
        self.trace.records.push(TraceRecord {
            iter: self.trace.records.len(),
            x,
            y,
            incumbent: self.values[best],
            regret,
            fit_s,
            propose_s,
            eval_s,
        });
        Ok(())
    }

    fn fail(self, error: Error) -> RunFailure<T> {
        RunFailure { trace: self.trace, error }
    }
}

/// Runs the ranking-surrogate optimizer on `objective`.
///
/// Draws `n_init` uniform points, then for each of `n_iters` rounds:
/// ranks all observations, trains the surrogate on them, proposes the
/// acquisition minimizer and evaluates it.
pub fn run<T, O>(objective: &O, cfg: &BoRunConfig) -> Result<RegretTrace<T>, RunFailure<T>>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
{
    let mut rec = Recorder::new(objective, cfg.seed, cfg.record_timing);
    if let Err(e) = cfg.validate() {
        return Err(rec.fail(e));
    }
    let space = objective.space();
    let mut design = substream(cfg.seed, Purpose::InitialDesign, 0);
    for _ in 0..cfg.n_init {
        let x = space.sample(&mut design);
        if let Err(e) = rec.evaluate(x, 0.0, 0.0) {
            return Err(rec.fail(e));
        }
    }

    let dim = space.dim();
    let mut model = IntensityModel::with_hidden(dim, &cfg.hidden, derive_seed(cfg.seed, Purpose::WeightInit, 0));
    for t in 1..=cfg.n_iters {
        if !cfg.warm_start && t > 1 {
            model = IntensityModel::with_hidden(dim, &cfg.hidden, derive_seed(cfg.seed, Purpose::WeightInit, t as u64));
        }
        let step = (|| -> Result<(Vec<T>, f64, f64)> {
            let obs = ObservationSet::new(rec.points.clone(), rec.values.clone())?;
            let t0 = Instant::now();
            fit(&mut model, &obs, &cfg.surrogate)?;
            let fit_s = rec.seconds(t0);
            let t1 = Instant::now();
            let acq = AcquisitionConfig {
                rng_seed: derive_seed(cfg.seed, Purpose::ProposalRound, t as u64),
                truncation_switch_n: cfg.surrogate.truncation_switch_n,
                ..cfg.acquisition.clone()
            };
            let x = propose_next(&model, &space, &obs, &acq)?;
            Ok((x, fit_s, rec.seconds(t1)))
        })();
        let result = step.and_then(|(x, fit_s, propose_s)| rec.evaluate(x, fit_s, propose_s));
        if let Err(e) = result {
            return Err(rec.fail(e));
        }
    }
    Ok(rec.trace)
}

/// Uniform random search with `budget` evaluations. Shares the initial
/// design stream with [`run`], so the first `n_init` queries of both
/// methods coincide for equal seeds.
pub fn random_search<T, O>(
    objective: &O,
    budget: usize,
    seed: u64,
    record_timing: bool,
) -> Result<RegretTrace<T>, RunFailure<T>>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
{
    let mut rec = Recorder::new(objective, seed, record_timing);
    if budget == 0 {
        return Err(rec.fail(Error::Input("budget must be >= 1".into())));
    }
    let space = objective.space();
    let mut design = substream(seed, Purpose::InitialDesign, 0);
    for _ in 0..budget {
        let x = space.sample(&mut design);
        if let Err(e) = rec.evaluate(x, 0.0, 0.0) {
            return Err(rec.fail(e));
        }
    }
    Ok(rec.trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::BenchmarkFunction;

    fn record(iter: usize, y: f64) -> TraceRecord<f64> {
        TraceRecord {
            iter,
            x: vec![iter as f64],
            y,
            incumbent: y,
            regret: None,
            fit_s: 0.0,
            propose_s: 0.0,
            eval_s: 0.0,
        }
    }

    #[test]
    fn incumbent_rules() {
        let t = RegretTrace { records: vec![record(0, 4.0)] };
        assert_eq!(incumbent(&t).unwrap(), (vec![0.0], 4.0));
        let t = RegretTrace { records: vec![record(0, 3.0), record(1, 1.0), record(2, 2.0)] };
        assert_eq!(incumbent(&t).unwrap().0, vec![1.0]);
        let t = RegretTrace { records: vec![record(0, 2.0), record(1, 1.0), record(2, 1.0)] };
        assert_eq!(incumbent(&t).unwrap().0, vec![1.0]);
        assert!(incumbent(&RegretTrace::<f64>::default()).is_err());
    }

    #[test]
    fn zero_iterations_is_initial_design_only() {
        let f = BenchmarkFunction::<f64>::branin();
        let cfg = BoRunConfig { n_iters: 0, record_timing: false, ..BoRunConfig::eri() };
        let trace = run(&f, &cfg).unwrap();
        assert_eq!(trace.len(), 12);
        let min = trace.records.iter().map(|r| r.y).fold(f64::INFINITY, f64::min);
        assert_eq!(trace.last().unwrap().incumbent, min);
    }

    #[test]
    fn random_search_shares_initial_design() {
        let f = BenchmarkFunction::<f64>::hartmann6();
        let cfg = BoRunConfig { n_iters: 0, seed: 17, ..BoRunConfig::r_lcb() };
        let bo = run(&f, &cfg).unwrap();
        let rs = random_search(&f, 30, 17, false).unwrap();
        for (a, b) in bo.records.iter().zip(&rs.records) {
            assert_eq!(a.x, b.x);
        }
        assert_eq!(rs.len(), 30);
    }

    #[test]
    fn invalid_configs_fail_with_empty_trace() {
        let f = BenchmarkFunction::<f64>::branin();
        let cfg = BoRunConfig { n_init: 1, ..BoRunConfig::eri() };
        let err = run(&f, &cfg).unwrap_err();
        assert!(err.trace.is_empty());
        let cfg = BoRunConfig { n_init: 3, ..BoRunConfig::eri() };
        assert!(run(&f, &cfg).is_err());
        assert!(random_search(&f, 0, 0, false).is_err());
    }
}
