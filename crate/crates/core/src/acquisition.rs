//! Ranking acquisitions: rectified LCB and expected ranking improvement.
//!
//! Both are expressed as objectives to *minimize*: R-LCB directly, ERI as
//! `-ERI`. A candidate whose rate reaches `q * n_obs` is rectified: its
//! objective value is replaced by a uniform draw `eps` from `[0, 1)` and the
//! descent does not move it further.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lbfgs::{minimize_box, LbfgsConfig, Probe};
use crate::poisson::{head_pmf_with_derivative, rank_mean, rank_mean_derivative, RankLaw, TRUNCATION_SWITCH_N};
use crate::rng::{substream, Purpose};
use crate::scalar::Scalar;
use crate::space::{uniform_point, SearchSpace};
use crate::surrogate::{IntensityModel, ObservationSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcquisitionKind {
    RLcb,
    Eri,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub kind: AcquisitionKind,
    pub beta: f64,
    /// Rectification quantile in `(0, 1]`.
    pub q: f64,
    /// Worst tolerable rank for ERI.
    pub k_max: usize,
    pub restarts: usize,
    pub discrete_samples: usize,
    pub rng_seed: u64,
    pub truncation_switch_n: usize,
    pub lbfgs: LbfgsConfig,
}

impl AcquisitionConfig {
    pub fn r_lcb() -> Self {
        Self {
            kind: AcquisitionKind::RLcb,
            beta: 1.0,
            q: 0.6,
            k_max: 5,
            restarts: 10,
            discrete_samples: 1000,
            rng_seed: 0,
            truncation_switch_n: TRUNCATION_SWITCH_N,
            lbfgs: LbfgsConfig::default(),
        }
    }

    pub fn eri() -> Self {
        Self { kind: AcquisitionKind::Eri, q: 0.4, ..Self::r_lcb() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::Input(format!("q must lie in (0, 1], got {}", self.q)));
        }
        if self.restarts == 0 || self.discrete_samples == 0 {
            return Err(Error::Input("restarts and discrete_samples must be >= 1".into()));
        }
        if !self.beta.is_finite() {
            return Err(Error::Input("beta must be finite".into()));
        }
        Ok(())
    }

    fn law(&self, n_obs: usize) -> RankLaw {
        RankLaw::for_candidate(n_obs, self.truncation_switch_n)
    }
}

/// `mu - beta * sqrt(mu) = sqrt(mu) (sqrt(mu) - beta)` with `mu` the mean rank.
pub fn lcb<T: Scalar>(rate: T, n_obs: usize, beta: T) -> T {
    lcb_under(rate, RankLaw::for_candidate(n_obs, TRUNCATION_SWITCH_N), beta)
}

pub fn lcb_under<T: Scalar>(rate: T, law: RankLaw, beta: T) -> T {
    let root = rank_mean(rate, law).sqrt();
    root * (root - beta)
}

fn lcb_rate_derivative<T: Scalar>(rate: T, law: RankLaw, beta: T) -> T {
    let mu = rank_mean(rate, law);
    let dmu = rank_mean_derivative(rate, law);
    (T::one() - beta / (T::lit(2.0) * mu.sqrt())) * dmu
}

/// Whether a candidate with this rate is rectified.
pub fn is_rectified<T: Scalar>(rate: T, n_obs: usize, q: f64) -> bool {
    rate.is_nan() || rate >= T::lit(q) * T::from_usize_lossy(n_obs)
}

/// Rectified LCB. Returns the value and whether rectification fired.
pub fn r_lcb<T: Scalar>(rate: T, n_obs: usize, cfg: &AcquisitionConfig, eps: T) -> (T, bool) {
    if is_rectified(rate, n_obs, cfg.q) {
        (eps, true)
    } else {
        (lcb_under(rate, cfg.law(n_obs), T::lit(cfg.beta)), false)
    }
}

/// Expected ranking improvement `Σ_{k=0..k_max} (k_max - k) P(rank = k)`.
pub fn eri<T: Scalar>(rate: T, n_obs: usize, k_max: usize) -> Result<T> {
    if k_max > n_obs {
        return Err(Error::Domain(format!("k_max {k_max} exceeds the {n_obs} observations")));
    }
    Ok(eri_under(rate, RankLaw::for_candidate(n_obs, TRUNCATION_SWITCH_N), k_max))
}

pub fn eri_under<T: Scalar>(rate: T, law: RankLaw, k_max: usize) -> T {
    eri_with_rate_derivative(rate, law, k_max).0
}

fn eri_with_rate_derivative<T: Scalar>(rate: T, law: RankLaw, k_max: usize) -> (T, T) {
    let (pmf, dpmf) = head_pmf_with_derivative(rate, law, k_max);
    let mut value = T::zero();
    let mut deriv = T::zero();
    for k in 0..=k_max {
        let w = T::from_usize_lossy(k_max - k);
        value += w * pmf[k];
        deriv += w * dpmf[k];
    }
    (value, deriv)
}

/// The minimized objective and its derivative with respect to the rate.
fn objective_in_rate<T: Scalar>(rate: T, n_obs: usize, cfg: &AcquisitionConfig) -> (T, T) {
    let law = cfg.law(n_obs);
    match cfg.kind {
        AcquisitionKind::RLcb => {
            let beta = T::lit(cfg.beta);
            (lcb_under(rate, law, beta), lcb_rate_derivative(rate, law, beta))
        }
        AcquisitionKind::Eri => {
            let (v, d) = eri_with_rate_derivative(rate, law, cfg.k_max);
            (-v, -d)
        }
    }
}

/// Objective value and input gradient at `x`, or `Frozen` when rectified.
pub fn probe<T: Scalar>(model: &IntensityModel<T>, x: &[T], cfg: &AcquisitionConfig, n_obs: usize) -> Probe<T> {
    let (rate, drate) = model.rate_with_input_grad(x);
    if is_rectified(rate, n_obs, cfg.q) {
        return Probe::Frozen;
    }
    let (value, dvalue) = objective_in_rate(rate, n_obs, cfg);
    Probe::Active { value, grad: drate.into_iter().map(|g| g * dvalue).collect() }
}

/// Objective value at `x` (minimized form), `None` when rectified.
pub fn acquisition_value<T: Scalar>(
    model: &IntensityModel<T>,
    x: &[T],
    cfg: &AcquisitionConfig,
    n_obs: usize,
) -> Option<T> {
    let rate = model.rate(x);
    (!is_rectified(rate, n_obs, cfg.q)).then(|| objective_in_rate(rate, n_obs, cfg).0)
}

/// Gradient of the minimized acquisition objective with respect to `x`;
/// `None` in the rectified region, where the objective is frozen.
pub fn grad_acquisition<T: Scalar>(
    model: &IntensityModel<T>,
    x: &[T],
    cfg: &AcquisitionConfig,
    n_obs: usize,
) -> Option<Vec<T>> {
    match probe(model, x, cfg, n_obs) {
        Probe::Active { grad, .. } => Some(grad),
        Probe::Frozen => None,
    }
}

/// A scored candidate from one proposal round.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate<T> {
    pub x: Vec<T>,
    pub value: T,
    pub rectified: bool,
}

/// Scores every restart (continuous) or sampled candidate (discrete).
pub fn score_candidates<T: Scalar>(
    model: &IntensityModel<T>,
    space: &SearchSpace<T>,
    n_obs: usize,
    cfg: &AcquisitionConfig,
) -> Result<Vec<Candidate<T>>> {
    cfg.validate()?;
    if space.dim() != model.dim() {
        return Err(Error::Input(format!("space dimension {} vs model {}", space.dim(), model.dim())));
    }
    match space {
        SearchSpace::Continuous { dim } => {
            let bounds = vec![(T::zero(), T::one()); *dim];
            Ok((0..cfg.restarts)
                .map(|r| {
                    let mut rng = substream(cfg.rng_seed, Purpose::Restart, r as u64);
                    let start: Vec<T> = uniform_point(*dim, &mut rng);
                    let eps = T::lit(rng.random::<f64>());
                    let d = minimize_box(|x: &[T]| probe(model, x, cfg, n_obs), &start, &bounds, &cfg.lbfgs);
                    match d.value {
                        Some(value) => Candidate { x: d.x, value, rectified: false },
                        None => Candidate { x: d.x, value: eps, rectified: true },
                    }
                })
                .collect())
        }
        SearchSpace::Discrete { candidates } => {
            if candidates.is_empty() {
                return Err(Error::Input("empty candidate set".into()));
            }
            let mut rng = substream(cfg.rng_seed, Purpose::DiscreteCandidates, 0);
            let picked: Vec<usize> = if candidates.len() <= cfg.discrete_samples {
                (0..candidates.len()).collect()
            } else {
                rand::seq::index::sample(&mut rng, candidates.len(), cfg.discrete_samples).into_vec()
            };
            let flat: Vec<T> = picked.iter().flat_map(|&i| candidates[i].iter().copied()).collect();
            let rates = model.rates(&flat);
            Ok(picked
                .iter()
                .zip(rates)
                .map(|(&i, rate)| {
                    let eps = T::lit(rng.random::<f64>());
                    let x = candidates[i].clone();
                    if is_rectified(rate, n_obs, cfg.q) {
                        Candidate { x, value: eps, rectified: true }
                    } else {
                        Candidate { x, value: objective_in_rate(rate, n_obs, cfg).0, rectified: false }
                    }
                })
                .collect())
        }
    }
}

/// Next query: the candidate with the smallest objective, earliest on ties.
pub fn propose_next<T: Scalar>(
    model: &IntensityModel<T>,
    space: &SearchSpace<T>,
    obs: &ObservationSet<T>,
    cfg: &AcquisitionConfig,
) -> Result<Vec<T>> {
    if obs.is_empty() {
        return Err(Error::Precondition("proposal needs at least one observation".into()));
    }
    let scored = score_candidates(model, space, obs.len(), cfg)?;
    let mut best = 0;
    for (i, c) in scored.iter().enumerate() {
        if c.value < scored[best].value {
            best = i;
        }
    }
    Ok(scored.into_iter().nth(best).map(|c| c.x).expect("at least one candidate"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_rate_model(dim: usize, rate: f64) -> IntensityModel<f64> {
        let mut m = IntensityModel::with_hidden(dim, &[4], 0);
        let n = m.network().params().len();
        let p = m.network_mut().params_mut();
        p.iter_mut().for_each(|v| *v = 0.0);
        p[n - 1] = rate.exp_m1().ln();
        m
    }

    #[test]
    fn lcb_examples() {
        // mean 0.5 from rate 1 against a single observation.
        let v = lcb(1.0, 1, 1.0);
        assert!((v - 0.5f64.sqrt() * (0.5f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!((v + 0.207_106_781).abs() < 1e-8);
        assert_eq!(lcb(0.0, 5, 1.0), 0.0);
        // Plain regime: mean = rate = beta^2 is a root.
        assert!(lcb(4.0f64, 20, 2.0).abs() < 1e-12);
    }

    #[test]
    fn r_lcb_branches() {
        let cfg = AcquisitionConfig::r_lcb();
        let (v, rect) = r_lcb(3.0, 10, &cfg, 0.9);
        assert!(!rect);
        assert!((v - lcb(3.0f64, 10, 1.0)).abs() < 1e-15);
        assert_eq!(r_lcb(7.0, 10, &cfg, 0.42), (0.42, true));
        // Threshold itself rectifies.
        assert!(r_lcb(6.0, 10, &cfg, 0.1).1);
        let vanilla = AcquisitionConfig { q: 1.0, ..cfg };
        assert!(!r_lcb(9.5, 10, &vanilla, 0.1).1);
    }

    #[test]
    fn rectification_flag_flips_at_threshold() {
        let cfg = AcquisitionConfig::r_lcb();
        for i in 0..200 {
            let rate = i as f64 * 0.05;
            assert_eq!(r_lcb(rate, 10, &cfg, 0.5).1, rate >= 6.0, "rate {rate}");
        }
    }

    #[test]
    fn eri_examples() {
        assert!((eri(1e-12f64, 10, 5).unwrap() - 5.0).abs() < 1e-9);
        assert!((eri(1.0f64, 1, 1).unwrap() - 0.5).abs() < 1e-12);
        for &r in &[0.0, 0.3, 4.0, 40.0] {
            assert_eq!(eri(r, 10, 0).unwrap(), 0.0);
        }
        assert!(matches!(eri(1.0, 3, 5), Err(Error::Domain(_))));
    }

    #[test]
    fn eri_non_increasing_in_rate() {
        for &n in &[5usize, 11, 12, 40] {
            let mut prev = f64::INFINITY;
            for i in 0..400 {
                let v = eri(i as f64 * 0.05, n, 5).unwrap();
                assert!(v <= prev + 1e-12, "n={n} i={i}");
                prev = v;
            }
        }
    }

    #[test]
    fn eri_rate_derivative_is_negative_near_zero() {
        for &law in &[RankLaw::Plain, RankLaw::Truncated { max_rank: 8 }] {
            let (_, d) = eri_with_rate_derivative(1e-6, law, 5);
            assert!(d < 0.0);
        }
    }

    #[test]
    fn constant_rate_has_zero_gradient() {
        let m = constant_rate_model(3, 0.8);
        for cfg in [AcquisitionConfig::r_lcb(), AcquisitionConfig::eri()] {
            let g = grad_acquisition(&m, &[0.2, 0.5, 0.9], &cfg, 20).unwrap();
            assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn rectified_region_has_no_gradient() {
        let m = constant_rate_model(2, 9.0);
        assert!(grad_acquisition(&m, &[0.5, 0.5], &AcquisitionConfig::r_lcb(), 10).is_none());
    }

    #[test]
    fn discrete_proposal_picks_only_viable_candidate() {
        // Rate = softplus(w * x0 + b) on a 1-d net; choose three candidates
        // realizing rates {0.1, 5, 9}.
        let mut m = IntensityModel::<f64>::with_hidden(1, &[1], 0);
        let p = m.network_mut().params_mut();
        // w0 = 1 (input -> hidden), b0 = 0, w1 = 1 (hidden -> out), b1 = 0.
        p.copy_from_slice(&[1.0, 0.0, 1.0, 0.0]);
        let inv = |r: f64| r.exp_m1().ln();
        // softplus(z) for z <= 0 needs a negative output; shift with the bias.
        let b1 = inv(0.1);
        m.network_mut().params_mut()[3] = b1;
        let xs: Vec<f64> = [0.1, 5.0, 9.0].iter().map(|&r| (inv(r) - b1) / 20.0).collect();
        // Rescale the first-layer weight so all candidates lie in [0, 1].
        m.network_mut().params_mut()[0] = 20.0;
        let candidates: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        for (c, r) in candidates.iter().zip([0.1, 5.0, 9.0]) {
            assert!((m.rate(c) - r).abs() < 1e-9);
        }
        let space = SearchSpace::Discrete { candidates: candidates.clone() };
        let obs =
            ObservationSet::new((0..10).map(|i| vec![i as f64 / 9.0]).collect(), (0..10).map(|i| i as f64).collect())
                .unwrap();
        let x = propose_next(&m, &space, &obs, &AcquisitionConfig::r_lcb()).unwrap();
        assert_eq!(x, candidates[0]);
    }
}
