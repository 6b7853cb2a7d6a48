use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Search domain in normalized coordinates: either the whole unit cube or a
/// finite list of candidate points inside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SearchSpace<T> {
    Continuous { dim: usize },
    Discrete { candidates: Vec<Vec<T>> },
}

impl<T: Scalar> SearchSpace<T> {
    pub fn dim(&self) -> usize {
        match self {
            SearchSpace::Continuous { dim } => *dim,
            SearchSpace::Discrete { candidates } => candidates.first().map_or(0, Vec::len),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, SearchSpace::Discrete { .. })
    }

    /// Uniform draw: uniform in the cube, or a uniformly chosen candidate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        match self {
            SearchSpace::Continuous { dim } => uniform_point(*dim, rng),
            SearchSpace::Discrete { candidates } => candidates[rng.random_range(0..candidates.len())].clone(),
        }
    }

    pub fn contains(&self, x: &[T]) -> bool {
        match self {
            SearchSpace::Continuous { dim } => x.len() == *dim && in_unit_cube(x),
            SearchSpace::Discrete { candidates } => candidates.iter().any(|c| c.as_slice() == x),
        }
    }
}

pub fn uniform_point<T: Scalar, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<T> {
    (0..dim).map(|_| T::lit(rng.random::<f64>())).collect()
}

pub fn in_unit_cube<T: Scalar>(x: &[T]) -> bool {
    x.iter().all(|&c| c >= T::zero() && c <= T::one())
}

/// Maps `x` from `[lower, upper]` to the unit cube.
pub fn normalize<T: Scalar>(x: &[T], bounds: &[(T, T)]) -> Vec<T> {
    x.iter().zip(bounds).map(|(&v, &(lo, hi))| (v - lo) / (hi - lo)).collect()
}

/// Maps `u` from the unit cube to `[lower, upper]`.
pub fn denormalize<T: Scalar>(u: &[T], bounds: &[(T, T)]) -> Vec<T> {
    u.iter().zip(bounds).map(|(&v, &(lo, hi))| lo + v * (hi - lo)).collect()
}
