//! Objectives: closed-form test functions, lookup tables, and the
//! ranking-robustness study.

mod functions;
mod study;
mod tabular;

pub use functions::{BenchmarkFunction, FunctionKind, FORRESTER_MINIMUM, HARTMANN6_MINIMUM};
pub use study::{
    forrester_ranking_study, grid_rank_correlation, stratified_design, unit_grid, RankingStudyConfig, RankingStudyRow,
};
pub use tabular::TabularBenchmark;

use crate::error::Result;
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::space::SearchSpace;

/// A black-box objective over normalized coordinates (minimized).
pub trait Objective<T: Scalar>: Send + Sync {
    fn name(&self) -> String;

    fn space(&self) -> SearchSpace<T>;

    fn dim(&self) -> usize {
        self.space().dim()
    }

    /// Observed value at `x`; noise, if any, is drawn from `rng`.
    fn evaluate(&self, x: &[T], rng: &mut Rng) -> Result<T>;

    /// Noise-free value at `x`.
    fn true_value(&self, x: &[T]) -> Result<T>;

    /// Known global minimum, if any.
    fn optimum(&self) -> Option<T>;

    /// Coordinates reported in traces.
    fn raw_point(&self, x: &[T]) -> Vec<T> {
        x.to_vec()
    }
}
