//! Bayesian optimization on a ranking response surface.
//!
//! Instead of regressing raw objective values, the surrogate models each
//! candidate's *rank* among the observations as a (truncated) Poisson count
//! whose rate is produced by an MLP over the unit cube. Two acquisitions are
//! built on the rank posterior: a rectified lower confidence bound and the
//! expected ranking improvement. Because only ranks enter the model, any
//! strictly increasing transform of the objective leaves the optimizer's
//! query sequence unchanged.
//!
//! The numerical core is generic over the scalar type ([`Scalar`], `f32` or
//! `f64`); the aliases below fix it to `f64`.

pub mod acquisition;
pub mod adam;
pub mod benchmarks;
pub mod engine;
pub mod error;
pub mod lbfgs;
pub mod mlp;
pub mod poisson;
pub mod rng;
pub mod scalar;
pub mod space;
pub mod stats;
pub mod surrogate;

pub use acquisition::{AcquisitionConfig, AcquisitionKind};
pub use benchmarks::{BenchmarkFunction, FunctionKind, Objective, TabularBenchmark};
pub use engine::{incumbent, random_search, run, BoRunConfig, RegretTrace, RunFailure, TraceRecord};
pub use error::{Error, Result};
pub use poisson::{RankLaw, RankPosterior, TruncatedPoisson};
pub use scalar::Scalar;
pub use space::SearchSpace;
pub use surrogate::{IntensityModel, ObservationSet, TrainConfig};

pub type TruncatedPoissonF64 = TruncatedPoisson<f64>;
pub type RankPosteriorF64 = RankPosterior<f64>;
pub type IntensityModelF64 = IntensityModel<f64>;
pub type ObservationSetF64 = ObservationSet<f64>;
pub type SearchSpaceF64 = SearchSpace<f64>;
pub type BenchmarkFunctionF64 = BenchmarkFunction<f64>;
pub type TabularBenchmarkF64 = TabularBenchmark<f64>;
pub type RegretTraceF64 = RegretTrace<f64>;

pub type IntensityModelF32 = IntensityModel<f32>;
pub type BenchmarkFunctionF32 = BenchmarkFunction<f32>;
