//! How well the ranking surrogate recovers the true ordering of a 1-d
//! function from a handful of noisy queries.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::{derive_seed, substream, Purpose};
use crate::scalar::Scalar;
use crate::space::uniform_point;
use crate::stats::spearman;
use crate::surrogate::{fit, predict, IntensityModel, ObservationSet, TrainConfig, DEFAULT_HIDDEN};

use super::{BenchmarkFunction, Objective};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingStudyConfig {
    pub n_train: usize,
    pub n_grid: usize,
    pub sigmas: Vec<f64>,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for RankingStudyConfig {
    fn default() -> Self {
        Self {
            n_train: 15,
            n_grid: 100,
            sigmas: vec![0.0, 0.05, 0.15, 0.25, 0.35, 0.45],
            seed: 0,
            hidden: DEFAULT_HIDDEN.to_vec(),
            train: TrainConfig { steps: 1000, decay_every: 300, ..TrainConfig::default() },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingStudyRow {
    pub sigma: f64,
    pub spearman: f64,
}

/// Evenly spaced normalized grid with `n` points covering `[0, 1]`.
pub fn unit_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Spearman correlation between predicted mean ranks on the grid and the
/// grid's true function values.
pub fn grid_rank_correlation<T: Scalar>(
    model: &IntensityModel<T>,
    f: &BenchmarkFunction<T>,
    grid: &[f64],
    n_obs: usize,
    use_truncated: bool,
) -> Result<f64> {
    let mut predicted = Vec::with_capacity(grid.len());
    let mut truth = Vec::with_capacity(grid.len());
    for &g in grid {
        let x = [T::lit(g)];
        predicted.push(predict(model, &x, n_obs, use_truncated)?.mean.as_f64());
        truth.push(f.true_value(&x)?.as_f64());
    }
    Ok(spearman(&predicted, &truth))
}

/// Stratified design on the unit interval: one uniform draw inside each of
/// `n` equal cells.
pub fn stratified_design<T: Scalar>(n: usize, rng: &mut crate::rng::Rng) -> Vec<Vec<T>> {
    (0..n)
        .map(|i| {
            let u = uniform_point::<f64, _>(1, rng)[0];
            vec![T::lit((i as f64 + u) / n as f64)]
        })
        .collect()
}

/// For each noise level: query Forrester at a stratified `n_train`-point
/// design with that noise, fit a fresh surrogate to the observed ranks, and score the
/// predicted ranking of the `n_grid`-point grid on `[0, 0.8]` against the
/// noiseless one. The same query locations are reused across noise levels;
/// only the noise differs.
pub fn forrester_ranking_study<T: Scalar>(cfg: &RankingStudyConfig) -> Result<Vec<RankingStudyRow>> {
    let grid = unit_grid(cfg.n_grid);
    let mut design_rng = substream(cfg.seed, Purpose::Study, 0);
    let points: Vec<Vec<T>> = stratified_design(cfg.n_train, &mut design_rng);
    let use_truncated = cfg.n_train < cfg.train.truncation_switch_n;
    cfg.sigmas
        .iter()
        .enumerate()
        .map(|(i, &sigma)| {
            let f = BenchmarkFunction::<T>::forrester().with_noise(T::lit(sigma));
            let mut noise = substream(cfg.seed, Purpose::Noise, i as u64);
            let values = points.iter().map(|p| f.evaluate(p, &mut noise)).collect::<Result<Vec<T>>>()?;
            let obs = ObservationSet::new(points.clone(), values)?;
            let mut model =
                IntensityModel::with_hidden(1, &cfg.hidden, derive_seed(cfg.seed, Purpose::WeightInit, i as u64));
            fit(&mut model, &obs, &cfg.train)?;
            let clean = BenchmarkFunction::<T>::forrester();
            let spearman = grid_rank_correlation(&model, &clean, &grid, cfg.n_train, use_truncated)?;
            Ok(RankingStudyRow { sigma, spearman })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spans_domain() {
        let g = unit_grid(100);
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[99], 1.0);
    }

    #[test]
    fn constant_predictor_scores_zero() {
        let mut m = IntensityModel::<f64>::with_hidden(1, &[4], 0);
        m.network_mut().params_mut().iter_mut().for_each(|p| *p = 0.0);
        let f = BenchmarkFunction::forrester();
        let rho = grid_rank_correlation(&m, &f, &unit_grid(100), 15, false).unwrap();
        assert_eq!(rho, 0.0);
    }

    #[test]
    fn design_has_one_point_per_cell() {
        let mut rng = substream(3, Purpose::Study, 0);
        let pts = stratified_design::<f64>(15, &mut rng);
        for (i, p) in pts.iter().enumerate() {
            assert!(p[0] >= i as f64 / 15.0 && p[0] < (i + 1) as f64 / 15.0);
        }
    }

    #[test]
    fn noiseless_study_recovers_ordering() {
        let cfg = RankingStudyConfig { sigmas: vec![0.0], ..Default::default() };
        let rows = forrester_ranking_study::<f64>(&cfg).unwrap();
        assert!(rows[0].spearman >= 0.95, "{rows:?}");
    }
}
