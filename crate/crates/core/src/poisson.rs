//! Truncated-Poisson rank distributions.
//!
//! A candidate's rank among `max_rank` comparison points is modeled as a
//! Poisson count with the given rate, renormalized on `{0, ..., max_rank}`:
//!
//! ```text
//! P(K = k) = (rate^k / k!) / S(max_rank),   S(m) = Σ_{i=0..m} rate^i / i!
//! ```
//!
//! The `exp(-rate)` factor of the untruncated pmf cancels in the ratio and is
//! never evaluated. All sums are taken in log space so rates in the thousands
//! are safe.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Scalar};

/// Sample count at which rank distributions switch from the truncated to the
/// plain Poisson form.
pub const TRUNCATION_SWITCH_N: usize = 12;

/// `ln(k!)` for `k = 0..=n`, built by cumulative summation.
pub fn log_factorials<T: Scalar>(n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = T::zero();
    out.push(acc);
    for j in 1..=n {
        acc += T::from_usize_lossy(j).ln();
        out.push(acc);
    }
    out
}

/// `log S(m)` with `S(m) = Σ_{i=0..m} rate^i / i!`.
pub fn log_partial_exp_sum<T: Scalar>(rate: T, m: usize) -> T {
    if rate == T::zero() {
        return T::zero();
    }
    let ln_rate = rate.ln();
    let mut terms = Vec::with_capacity(m + 1);
    let mut ln_fact = T::zero();
    for i in 0..=m {
        if i > 0 {
            ln_fact += T::from_usize_lossy(i).ln();
        }
        terms.push(T::from_usize_lossy(i) * ln_rate - ln_fact);
    }
    log_sum_exp(&terms)
}

fn check_rate<T: Scalar>(rate: T) -> Result<()> {
    if !rate.is_finite() || rate < T::zero() {
        return Err(Error::Domain(format!("rate must be finite and >= 0, got {rate}")));
    }
    Ok(())
}

/// `k ln(rate) - ln(k!)` with the convention `0 ln 0 = 0`.
#[inline]
fn log_unnormalized<T: Scalar>(rate: T, k: usize, ln_k_fact: T) -> T {
    if k == 0 {
        -ln_k_fact
    } else if rate == T::zero() {
        T::neg_infinity()
    } else {
        T::from_usize_lossy(k) * rate.ln() - ln_k_fact
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedPoisson<T> {
    rate: T,
    max_rank: usize,
}

impl<T: Scalar> TruncatedPoisson<T> {
    pub fn new(rate: T, max_rank: usize) -> Result<Self> {
        check_rate(rate)?;
        Ok(Self { rate, max_rank })
    }

    pub fn rate(&self) -> T {
        self.rate
    }

    pub fn max_rank(&self) -> usize {
        self.max_rank
    }

    pub fn log_normalizer(&self) -> T {
        log_partial_exp_sum(self.rate, self.max_rank)
    }

    pub fn log_pmf(&self, k: usize) -> Result<T> {
        if k > self.max_rank {
            return Err(Error::Domain(format!("rank {k} exceeds truncation bound {}", self.max_rank)));
        }
        let ln_fact = log_factorials::<T>(k)[k];
        Ok(log_unnormalized(self.rate, k, ln_fact) - self.log_normalizer())
    }

    pub fn pmf(&self, k: usize) -> Result<T> {
        self.log_pmf(k).map(T::exp)
    }

    /// The whole pmf over `0..=max_rank`.
    pub fn pmf_vec(&self) -> Vec<T> {
        let ln_fact = log_factorials::<T>(self.max_rank);
        let logs: Vec<T> = (0..=self.max_rank).map(|k| log_unnormalized(self.rate, k, ln_fact[k])).collect();
        let ln_z = log_sum_exp(&logs);
        logs.into_iter().map(|l| (l - ln_z).exp()).collect()
    }

    /// `rate * S(max_rank - 1) / S(max_rank)`; zero when `max_rank = 0`.
    pub fn mean(&self) -> T {
        if self.max_rank == 0 || self.rate == T::zero() {
            return T::zero();
        }
        let ln_ratio = log_partial_exp_sum(self.rate, self.max_rank - 1) - self.log_normalizer();
        self.rate * ln_ratio.exp()
    }

    /// Exact variance of the truncated law. Acquisitions use `sqrt(mean)`
    /// instead; this is kept for diagnostics.
    pub fn variance(&self) -> T {
        let mean = self.mean();
        if self.max_rank < 2 {
            // Bernoulli or point mass.
            return mean - mean * mean;
        }
        let ln_z = self.log_normalizer();
        let second_factorial = self.rate * self.rate * (log_partial_exp_sum(self.rate, self.max_rank - 2) - ln_z).exp();
        (second_factorial + mean - mean * mean).max(T::zero())
    }
}

/// Plain Poisson moments `(mean, variance) = (rate, rate)`.
pub fn untruncated_mean_variance<T: Scalar>(rate: T) -> Result<(T, T)> {
    check_rate(rate)?;
    Ok((rate, rate))
}

/// Which rank distribution applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankLaw {
    Truncated { max_rank: usize },
    Plain,
}

impl RankLaw {
    /// Law of a new candidate ranked against `n_obs` observations: it can
    /// fall below all of them, so the bound is `n_obs`.
    pub fn for_candidate(n_obs: usize, switch_n: usize) -> Self {
        if n_obs >= switch_n {
            RankLaw::Plain
        } else {
            RankLaw::Truncated { max_rank: n_obs }
        }
    }

    /// Law of an observed point ranked against the other `n_obs - 1`.
    pub fn for_observed(n_obs: usize, switch_n: usize) -> Self {
        if n_obs >= switch_n {
            RankLaw::Plain
        } else {
            RankLaw::Truncated { max_rank: n_obs.saturating_sub(1) }
        }
    }
}

/// Plain Poisson pmf at `k`.
pub fn poisson_pmf<T: Scalar>(rate: T, k: usize) -> T {
    let ln_fact = log_factorials::<T>(k)[k];
    (log_unnormalized(rate, k, ln_fact) - rate).exp()
}

/// Mean rank under `law`.
pub fn rank_mean<T: Scalar>(rate: T, law: RankLaw) -> T {
    match law {
        RankLaw::Plain => rate,
        RankLaw::Truncated { max_rank } => TruncatedPoisson { rate, max_rank }.mean(),
    }
}

/// `d mean / d rate` under `law`.
///
/// For the truncated law with `p` its pmf and `M` the bound,
/// `d p_k / d rate = p_{k-1} - p_k (1 - p_M)`, which gives
/// `d mean / d rate = (1 - p_M) - rate (p_{M-1} - p_M (1 - p_M))`.
pub fn rank_mean_derivative<T: Scalar>(rate: T, law: RankLaw) -> T {
    match law {
        RankLaw::Plain => T::one(),
        RankLaw::Truncated { max_rank } => {
            if max_rank == 0 {
                return T::zero();
            }
            let pmf = TruncatedPoisson { rate, max_rank }.pmf_vec();
            let p_top = pmf[max_rank];
            let p_below = pmf[max_rank - 1];
            (T::one() - p_top) - rate * (p_below - p_top * (T::one() - p_top))
        }
    }
}

/// The pmf over ranks `0..=k_max` and its derivative with respect to the rate.
/// Ranks beyond a truncation bound carry zero mass.
pub fn head_pmf_with_derivative<T: Scalar>(rate: T, law: RankLaw, k_max: usize) -> (Vec<T>, Vec<T>) {
    let (pmf, tail_factor) = match law {
        RankLaw::Plain => ((0..=k_max).map(|k| poisson_pmf(rate, k)).collect::<Vec<T>>(), T::one()),
        RankLaw::Truncated { max_rank } => {
            let full = TruncatedPoisson { rate, max_rank }.pmf_vec();
            let tail = T::one() - full[max_rank];
            let head = (0..=k_max).map(|k| full.get(k).copied().unwrap_or_else(T::zero)).collect();
            (head, tail)
        }
    };
    let dpmf = (0..=k_max)
        .map(|k| {
            let prev = if k == 0 { T::zero() } else { pmf[k - 1] };
            let in_support = match law {
                RankLaw::Plain => true,
                RankLaw::Truncated { max_rank } => k <= max_rank,
            };
            if in_support {
                prev - pmf[k] * tail_factor
            } else {
                T::zero()
            }
        })
        .collect();
    (pmf, dpmf)
}

/// Predictive distribution of a candidate's rank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankPosterior<T> {
    pub pmf: Vec<T>,
    pub mean: T,
    /// `sqrt(mean)`, the Poisson mean-variance identity, in both regimes.
    pub stddev: T,
}

impl<T: Scalar> RankPosterior<T> {
    pub fn new(rate: T, law: RankLaw) -> Result<Self> {
        check_rate(rate)?;
        let (pmf, mean) = match law {
            RankLaw::Truncated { max_rank } => {
                let dist = TruncatedPoisson { rate, max_rank };
                (dist.pmf_vec(), dist.mean())
            }
            RankLaw::Plain => {
                // Enough support that the neglected tail is far below 1e-15.
                let r = rate.as_f64();
                let cutoff = (r + 12.0 * r.sqrt() + 40.0).ceil() as usize;
                let mut pmf: Vec<T> = (0..=cutoff).map(|k| poisson_pmf(rate, k)).collect();
                let total: T = pmf.iter().copied().sum();
                pmf.iter_mut().for_each(|p| *p /= total);
                (pmf, rate)
            }
        };
        Ok(Self { pmf, mean, stddev: mean.sqrt() })
    }
}

/// Standard normal CDF.
pub fn normal_cdf<T: Scalar>(z: T) -> T {
    let z = z.as_f64();
    T::lit(0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2))
}

/// Probability that two noisy observations keep the order of their true
/// values, when the true values differ by `gap` and each observation carries
/// independent `N(0, noise_sigma^2)` noise: `Φ(gap / (√2 σ))`.
pub fn correct_ranking_probability<T: Scalar>(gap: T, noise_sigma: T) -> Result<T> {
    if noise_sigma.is_nan() || noise_sigma <= T::zero() {
        return Err(Error::Domain(format!("noise_sigma must be > 0, got {noise_sigma}")));
    }
    Ok(normal_cdf(gap / (T::SQRT_2() * noise_sigma)))
}
