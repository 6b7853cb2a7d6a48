//! Ranking surrogate: an MLP intensity model fitted by maximum likelihood to
//! the observed strict-dominance ranks.
//!
//! The network output goes through a softplus, so the modeled rate (the
//! intensity times the unit-cube volume) is always positive. Each observed
//! point `x_j` with rank `k_j` among `N` observations contributes
//!
//! ```text
//! k_j ln r_j - ln(k_j!) - ln Σ_{i=0..N-1} r_j^i / i!     (N below the switch)
//! k_j ln r_j - ln(k_j!) - r_j                            (N at or above it)
//! ```
//!
//! to the log-likelihood, with `r_j` the model rate at `x_j`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::adam::Adam;
use crate::error::{Error, Result};
use crate::mlp::{Activations, Mlp};
use crate::poisson::{log_factorials, log_partial_exp_sum, RankLaw, RankPosterior, TRUNCATION_SWITCH_N};
use crate::rng::{substream, Purpose};
use crate::scalar::{sigmoid, softplus, Scalar};

/// Hidden layer widths used by the optimizer.
pub const DEFAULT_HIDDEN: [usize; 3] = [128, 128, 128];

/// `ranks[j]` = number of values strictly smaller than `values[j]`.
/// Ties share a rank.
pub fn compute_ranks<T: Scalar>(values: &[T]) -> Result<Vec<usize>> {
    if values.is_empty() {
        return Err(Error::Input("cannot rank an empty set".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite observation {v}")));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0; values.len()];
    for (pos, &idx) in order.iter().enumerate() {
        ranks[idx] = if pos > 0 && values[order[pos - 1]] == values[idx] { ranks[order[pos - 1]] } else { pos };
    }
    Ok(ranks)
}

/// Queried points (normalized to the unit cube), their raw observations and
/// derived ranks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet<T> {
    dim: usize,
    points: Vec<Vec<T>>,
    values: Vec<T>,
    ranks: Vec<usize>,
}

impl<T: Scalar> ObservationSet<T> {
    pub fn new(points: Vec<Vec<T>>, values: Vec<T>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Input(format!("{} points but {} values", points.len(), values.len())));
        }
        let dim = points.first().map(Vec::len).unwrap_or(0);
        for p in &points {
            if p.len() != dim {
                return Err(Error::Input("points have inconsistent dimension".into()));
            }
            if p.iter().any(|&c| !(c >= T::zero() && c <= T::one())) {
                return Err(Error::Domain(format!("point {p:?} outside the unit cube")));
            }
        }
        let ranks = compute_ranks(&values)?;
        Ok(Self { dim, points, values, ranks })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// Index of the best (lowest) observation, earliest on ties.
    pub fn best_index(&self) -> Option<usize> {
        self.ranks.iter().position(|&r| r == 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
    pub lr_decay: f64,
    pub decay_every: usize,
    /// Sample count from which the plain Poisson form replaces the
    /// truncated one.
    pub truncation_switch_n: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            batch_size: 64,
            initial_lr: 0.01,
            lr_decay: 0.2,
            decay_every: 30,
            truncation_switch_n: TRUNCATION_SWITCH_N,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.decay_every == 0 || self.truncation_switch_n == 0 {
            return Err(Error::Input("batch_size, decay_every and truncation_switch_n must be positive".into()));
        }
        if !self.initial_lr.is_finite() || self.initial_lr <= 0.0 {
            return Err(Error::Input(format!("initial_lr must be positive, got {}", self.initial_lr)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Input(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay)));
        }
        Ok(())
    }

    /// Learning rate in effect at `step` (0-based).
    pub fn learning_rate(&self, step: usize) -> f64 {
        self.initial_lr * self.lr_decay.powi((step / self.decay_every) as i32)
    }
}

/// MLP approximation of the Poisson intensity over the unit cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityModel<T> {
    net: Mlp<T>,
    rng_seed: u64,
    /// Number of completed `fit` calls; selects the minibatch stream.
    fit_rounds: u64,
}

impl<T: Scalar> IntensityModel<T> {
    /// The standard 3 x 128 architecture.
    pub fn new(dim: usize, rng_seed: u64) -> Self {
        Self::with_hidden(dim, &DEFAULT_HIDDEN, rng_seed)
    }

    pub fn with_hidden(dim: usize, hidden: &[usize], rng_seed: u64) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(dim);
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut rng = substream(rng_seed, Purpose::WeightInit, 0);
        Self { net: Mlp::new(&sizes, &mut rng), rng_seed, fit_rounds: 0 }
    }

    pub fn from_network(net: Mlp<T>, rng_seed: u64) -> Self {
        Self { net, rng_seed, fit_rounds: 0 }
    }

    pub fn network(&self) -> &Mlp<T> {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Mlp<T> {
        &mut self.net
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Modeled rate at `x` (always `> 0` up to underflow).
    pub fn rate(&self, x: &[T]) -> T {
        softplus(self.net.output(x))
    }

    /// Rates for a row-major batch of points.
    pub fn rates(&self, xs: &[T]) -> Vec<T> {
        self.net.forward(xs).output().iter().map(|&z| softplus(z)).collect()
    }

    /// Rate at `x` and its gradient with respect to `x`.
    pub fn rate_with_input_grad(&self, x: &[T]) -> (T, Vec<T>) {
        let (z, dz) = self.net.output_with_input_grad(x);
        let s = sigmoid(z);
        (softplus(z), dz.into_iter().map(|g| g * s).collect())
    }
}

/// Per-point log-likelihood term and its derivative with respect to the rate.
fn point_term<T: Scalar>(rate: T, rank: usize, law: RankLaw, ln_rank_fact: T) -> (T, T) {
    let k = T::from_usize_lossy(rank);
    let (k_ln_rate, k_over_rate) = if rank == 0 { (T::zero(), T::zero()) } else { (k * rate.ln(), k / rate) };
    match law {
        RankLaw::Plain => (k_ln_rate - ln_rank_fact - rate, k_over_rate - T::one()),
        RankLaw::Truncated { max_rank } => {
            let ln_z = log_partial_exp_sum(rate, max_rank);
            // d ln S(M) / d rate = S(M-1) / S(M) = 1 - P(K = M).
            let p_top = if rate == T::zero() {
                if max_rank == 0 {
                    T::one()
                } else {
                    T::zero()
                }
            } else {
                let ln_top = T::from_usize_lossy(max_rank) * rate.ln() - log_factorials::<T>(max_rank)[max_rank];
                (ln_top - ln_z).exp()
            };
            (k_ln_rate - ln_rank_fact - ln_z, k_over_rate - (T::one() - p_top))
        }
    }
}

fn check_likelihood_input<T: Scalar>(model: &IntensityModel<T>, obs: &ObservationSet<T>) -> Result<()> {
    if obs.len() < 2 {
        return Err(Error::Precondition(format!("need at least 2 observations, got {}", obs.len())));
    }
    if obs.dim() != model.dim() {
        return Err(Error::Input(format!(
            "observation dimension {} does not match model input {}",
            obs.dim(),
            model.dim()
        )));
    }
    Ok(())
}

fn flatten<T: Scalar>(points: &[Vec<T>], idx: impl Iterator<Item = usize>) -> Vec<T> {
    idx.flat_map(|i| points[i].iter().copied()).collect()
}

/// Log-likelihood of the observed ranks, `ln(k!)` terms included.
pub fn log_likelihood<T: Scalar>(
    model: &IntensityModel<T>,
    obs: &ObservationSet<T>,
    truncation_switch_n: usize,
) -> Result<T> {
    check_likelihood_input(model, obs)?;
    let law = RankLaw::for_observed(obs.len(), truncation_switch_n);
    let ln_fact = log_factorials::<T>(obs.len());
    let rates = model.rates(&flatten(obs.points(), 0..obs.len()));
    Ok(rates.iter().zip(obs.ranks()).map(|(&r, &k)| point_term(r, k, law, ln_fact[k]).0).sum())
}

/// Gradient of [`log_likelihood`] with respect to every network parameter,
/// in the flat layout of [`Mlp::params`].
pub fn grad_log_likelihood<T: Scalar>(
    model: &IntensityModel<T>,
    obs: &ObservationSet<T>,
    truncation_switch_n: usize,
) -> Result<Vec<T>> {
    check_likelihood_input(model, obs)?;
    let law = RankLaw::for_observed(obs.len(), truncation_switch_n);
    let mut grad = vec![T::zero(); model.net.params().len()];
    let acts = model.net.forward(&flatten(obs.points(), 0..obs.len()));
    let (_, d_out) = batch_loss(&acts, obs.ranks().iter().copied(), law, T::one());
    model.net.backward(&acts, &d_out, &mut grad);
    Ok(grad)
}

/// Scaled log-likelihood (without `ln(k!)`) of the points behind `acts`,
/// whose ranks are `ranks`, and its derivative with respect to each raw
/// network output.
fn batch_loss<T: Scalar>(
    acts: &Activations<T>,
    ranks: impl Iterator<Item = usize>,
    law: RankLaw,
    scale: T,
) -> (T, Vec<T>) {
    let mut total = T::zero();
    let d_out = acts
        .output()
        .iter()
        .zip(ranks)
        .map(|(&z, k)| {
            let rate = softplus(z);
            let (ll, dll) = point_term(rate, k, law, T::zero());
            total += ll;
            let d = dll * sigmoid(z);
            // Only reachable once the loss is already -inf.
            if d.is_nan() {
                T::zero()
            } else {
                d * scale
            }
        })
        .collect();
    (total * scale, d_out)
}

/// Outcome of [`fit`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitReport<T> {
    /// Full-data negative log-likelihood before training.
    pub initial_nll: T,
    /// Full-data negative log-likelihood of the returned parameters.
    pub final_nll: T,
    /// The trained parameters scored worse than the starting ones and were
    /// discarded.
    pub reverted: bool,
}

/// Maximizes the rank likelihood with ADAM on minibatches, in place.
///
/// Minibatches hold `min(batch_size, N)` points drawn without replacement
/// within each epoch; when `N <= batch_size` every step is full-batch. The
/// returned parameters never score worse on the full data than the input
/// parameters.
pub fn fit<T: Scalar>(
    model: &mut IntensityModel<T>,
    obs: &ObservationSet<T>,
    cfg: &TrainConfig,
) -> Result<FitReport<T>> {
    cfg.validate()?;
    check_likelihood_input(model, obs)?;
    let n = obs.len();
    let law = RankLaw::for_observed(n, cfg.truncation_switch_n);
    let full_nll = |m: &IntensityModel<T>| -> Result<T> { Ok(-log_likelihood(m, obs, cfg.truncation_switch_n)?) };
    let initial_nll = full_nll(model)?;
    if cfg.steps == 0 {
        return Ok(FitReport { initial_nll, final_nll: initial_nll, reverted: false });
    }

    let start = model.net.params().to_vec();
    let mut rng = substream(model.rng_seed, Purpose::Minibatch, model.fit_rounds);
    model.fit_rounds += 1;
    let batch = cfg.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    let mut adam = Adam::new(start.len());
    let mut grad = vec![T::zero(); start.len()];
    let scale = -T::one() / T::from_usize_lossy(batch);

    for step in 0..cfg.steps {
        let idx: &[usize] = if batch == n {
            &order
        } else {
            if cursor + batch > n {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            cursor += batch;
            &order[cursor - batch..cursor]
        };
        let acts = model.net.forward(&flatten(obs.points(), idx.iter().copied()));
        let (loss, d_out) = batch_loss(&acts, idx.iter().map(|&i| obs.ranks()[i]), law, scale);
        if !loss.is_finite() {
            model.net.params_mut().copy_from_slice(&start);
            return Err(Error::TrainingDiverged { step, loss: loss.as_f64() });
        }
        grad.iter_mut().for_each(|g| *g = T::zero());
        model.net.backward(&acts, &d_out, &mut grad);
        adam.step(model.net.params_mut(), &grad, T::lit(cfg.learning_rate(step)));
    }

    let final_nll = full_nll(model)?;
    if !final_nll.is_finite() || final_nll > initial_nll {
        model.net.params_mut().copy_from_slice(&start);
        return Ok(FitReport { initial_nll, final_nll: initial_nll, reverted: true });
    }
    Ok(FitReport { initial_nll, final_nll, reverted: false })
}

/// Predictive rank distribution of `x` against `n_obs` observations.
pub fn predict<T: Scalar>(
    model: &IntensityModel<T>,
    x: &[T],
    n_obs: usize,
    use_truncated: bool,
) -> Result<RankPosterior<T>> {
    if x.len() != model.dim() {
        return Err(Error::Input(format!("point has dimension {}, model expects {}", x.len(), model.dim())));
    }
    if x.iter().any(|&c| !(c >= T::zero() && c <= T::one())) {
        return Err(Error::Domain(format!("point {x:?} outside the unit cube")));
    }
    let law = if use_truncated { RankLaw::Truncated { max_rank: n_obs } } else { RankLaw::Plain };
    RankPosterior::new(model.rate(x), law)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson::TruncatedPoisson;

    /// Model whose rate is the constant `softplus(bias)`.
    fn constant_model(dim: usize, bias: f64) -> IntensityModel<f64> {
        let mut m = IntensityModel::with_hidden(dim, &[4], 0);
        let n = m.network().params().len();
        let params = m.network_mut().params_mut();
        params.iter_mut().for_each(|p| *p = 0.0);
        params[n - 1] = bias;
        m
    }

    /// Inverse softplus.
    fn logit_rate(rate: f64) -> f64 {
        rate.exp_m1().ln()
    }

    #[test]
    fn rank_examples() {
        assert_eq!(compute_ranks(&[3.2, 1.1, 2.5]).unwrap(), vec![2, 0, 1]);
        assert_eq!(compute_ranks(&[1.0, 1.0, 2.0]).unwrap(), vec![0, 0, 2]);
        assert_eq!(compute_ranks(&[7.7]).unwrap(), vec![0]);
        assert!(compute_ranks::<f64>(&[]).is_err());
        assert!(compute_ranks(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn observation_set_validates() {
        assert!(ObservationSet::new(vec![vec![0.5]], vec![1.0, 2.0]).is_err());
        assert!(ObservationSet::new(vec![vec![1.5]], vec![1.0]).is_err());
        let obs = ObservationSet::new(vec![vec![0.1], vec![0.9], vec![0.4]], vec![2.0, 1.0, 1.0]).unwrap();
        assert_eq!(obs.ranks(), &[2, 0, 0]);
        assert_eq!(obs.best_index(), Some(1));
    }

    #[test]
    fn two_point_likelihood_with_unit_rates() {
        let m = constant_model(1, logit_rate(1.0));
        let obs = ObservationSet::new(vec![vec![0.2], vec![0.8]], vec![0.0, 1.0]).unwrap();
        let ll = log_likelihood(&m, &obs, TRUNCATION_SWITCH_N).unwrap();
        assert!((ll - (-2.0 * 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn vanishing_rate_sends_likelihood_to_minus_infinity() {
        let m = constant_model(1, -800.0);
        let obs = ObservationSet::new(vec![vec![0.2], vec![0.8]], vec![0.0, 1.0]).unwrap();
        let ll = log_likelihood(&m, &obs, TRUNCATION_SWITCH_N).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
    }

    #[test]
    fn per_point_terms_are_log_pmfs() {
        let values = [0.3, 0.1, 0.7, 0.5];
        let obs = ObservationSet::new(values.iter().map(|&v| vec![v]).collect(), values.to_vec()).unwrap();
        for &rate in &[0.4, 1.0, 2.5] {
            let m = constant_model(1, logit_rate(rate));
            let ll = log_likelihood(&m, &obs, TRUNCATION_SWITCH_N).unwrap();
            let dist = TruncatedPoisson::new(m.rate(&[0.0]), 3).unwrap();
            let expect: f64 = obs.ranks().iter().map(|&k| dist.log_pmf(k).unwrap()).sum();
            assert!((ll - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn plain_regime_above_switch() {
        let values: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let obs = ObservationSet::new(values.iter().map(|_| vec![0.5]).collect(), values.clone()).unwrap();
        let m = constant_model(1, logit_rate(3.0));
        let r = m.rate(&[0.5]);
        let ll = log_likelihood(&m, &obs, 12).unwrap();
        let expect: f64 = obs.ranks().iter().map(|&k| k as f64 * r.ln() - log_factorials::<f64>(k)[k] - r).sum();
        assert!((ll - expect).abs() < 1e-10);
    }

    #[test]
    fn dead_relu_layer_has_zero_upstream_gradient() {
        // Hidden biases strongly negative: every ReLU is off, only the output
        // bias receives gradient.
        let mut m = IntensityModel::<f64>::with_hidden(2, &[4, 4], 1);
        let net = m.network_mut();
        for l in 0..2 {
            let (w, b) = net.layer_offsets(l);
            let width = net.sizes()[l + 1];
            let p = net.params_mut();
            p[w..b].iter_mut().for_each(|v| *v = 0.0);
            p[b..b + width].iter_mut().for_each(|v| *v = -5.0);
        }
        let obs =
            ObservationSet::new(vec![vec![0.1, 0.2], vec![0.6, 0.3], vec![0.9, 0.9]], vec![1.0, 3.0, 2.0]).unwrap();
        let g = grad_log_likelihood(&m, &obs, TRUNCATION_SWITCH_N).unwrap();
        let n = g.len();
        assert!(g[..n - 1].iter().all(|&v| v == 0.0));
        assert!(g[n - 1] != 0.0);
    }

    #[test]
    fn rank_term_derivative_is_linear_in_rank() {
        for &law in &[RankLaw::Plain, RankLaw::Truncated { max_rank: 9 }] {
            let (_, d1) = point_term(2.0f64, 3, law, 0.0);
            let (_, d2) = point_term(2.0, 6, law, 0.0);
            let (_, d0) = point_term(2.0, 0, law, 0.0);
            // d/dr of k ln r alone doubles when k doubles.
            assert!(((d2 - d0) - 2.0 * (d1 - d0)).abs() < 1e-12);
        }
    }

    #[test]
    fn likelihood_needs_two_points() {
        let m = constant_model(1, 0.0);
        let obs = ObservationSet::new(vec![vec![0.5]], vec![1.0]).unwrap();
        assert!(matches!(log_likelihood(&m, &obs, 12), Err(Error::Precondition(_))));
        assert!(matches!(fit(&mut m.clone(), &obs, &TrainConfig::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn zero_steps_leave_model_untouched() {
        let mut m = IntensityModel::<f64>::with_hidden(1, &[8, 8], 3);
        let before = m.clone();
        let obs = ObservationSet::new(vec![vec![0.2], vec![0.8]], vec![0.0, 1.0]).unwrap();
        let cfg = TrainConfig { steps: 0, ..TrainConfig::default() };
        fit(&mut m, &obs, &cfg).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn fit_orders_rates_by_rank() {
        let mut m = IntensityModel::<f64>::with_hidden(1, &[16, 16, 16], 9);
        let obs = ObservationSet::new(vec![vec![0.1], vec![0.9]], vec![0.0, 1.0]).unwrap();
        let report = fit(&mut m, &obs, &TrainConfig::default()).unwrap();
        assert!(report.final_nll <= report.initial_nll);
        assert!(m.rate(&[0.1]) < m.rate(&[0.9]));
    }

    #[test]
    fn fit_is_deterministic() {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 19.0, ((i * 7) % 20) as f64 / 19.0]).collect();
        let vals: Vec<f64> = pts.iter().map(|p| (p[0] - 0.3).powi(2) + p[1]).collect();
        let obs = ObservationSet::new(pts, vals).unwrap();
        let cfg = TrainConfig { batch_size: 8, steps: 40, ..TrainConfig::default() };
        let mut a = IntensityModel::<f64>::with_hidden(2, &[16, 16], 4);
        let mut b = a.clone();
        fit(&mut a, &obs, &cfg).unwrap();
        fit(&mut b, &obs, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn learning_rate_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.learning_rate(0), 0.01);
        assert_eq!(cfg.learning_rate(29), 0.01);
        assert!((cfg.learning_rate(30) - 0.002).abs() < 1e-15);
        assert!((cfg.learning_rate(99) - 0.01 * 0.2f64.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn predict_regimes() {
        let m = constant_model(1, logit_rate(1.0));
        let p = predict(&m, &[0.3], 1, true).unwrap();
        assert!((p.pmf[0] - 0.5).abs() < 1e-12 && (p.mean - 0.5).abs() < 1e-12);
        let p = predict(&m, &[0.3], 20, false).unwrap();
        assert!((p.mean - 1.0).abs() < 1e-12);
        assert!((p.stddev - 1.0).abs() < 1e-12);
        assert!(predict(&m, &[1.3], 20, false).is_err());
    }
}
