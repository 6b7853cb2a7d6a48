//! Projected limited-memory BFGS on a box, with "frozen" regions.
//!
//! The objective may decline to evaluate a point (returning
//! [`Probe::Frozen`]). A start point that is frozen is returned unchanged,
//! and an iterate that steps into a frozen point stops there.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Result of probing the objective at a point.
#[derive(Clone, Debug, PartialEq)]
pub enum Probe<T> {
    Active { value: T, grad: Vec<T> },
    Frozen,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop once the projected gradient's infinity norm drops below this.
    pub grad_tol: f64,
    pub armijo_c1: f64,
    pub max_backtracks: usize,
    /// Largest coordinate move of the first (steepest-descent) step.
    pub first_step: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self { memory: 10, max_iters: 50, grad_tol: 1e-6, armijo_c1: 1e-4, max_backtracks: 30, first_step: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Descent<T> {
    pub x: Vec<T>,
    /// Final objective value; `None` when the descent ended frozen.
    pub value: Option<T>,
    pub iterations: usize,
}

impl<T> Descent<T> {
    pub fn is_frozen(&self) -> bool {
        self.value.is_none()
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn inf_norm<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
}

/// Gradient with components zeroed where the bound blocks descent.
fn projected_gradient<T: Scalar>(x: &[T], g: &[T], bounds: &[(T, T)]) -> Vec<T> {
    x.iter()
        .zip(g)
        .zip(bounds)
        .map(
            |((&xi, &gi), &(lo, hi))| {
                if (xi <= lo && gi > T::zero()) || (xi >= hi && gi < T::zero()) {
                    T::zero()
                } else {
                    gi
                }
            },
        )
        .collect()
}

/// Two-loop recursion: `-H g` for the stored curvature pairs.
fn two_loop<T: Scalar>(g: &[T], history: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = *rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, &yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|qi| *qi *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, &si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|qi| *qi = -*qi);
    q
}

/// Minimizes `f` over the box `bounds` starting from `x0` (clamped into it).
pub fn minimize_box<T, F>(mut f: F, x0: &[T], bounds: &[(T, T)], cfg: &LbfgsConfig) -> Descent<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> Probe<T>,
{
    let clamp = |x: &mut [T]| {
        x.iter_mut().zip(bounds).for_each(|(v, &(lo, hi))| *v = v.max(lo).min(hi));
    };
    let mut x = x0.to_vec();
    clamp(&mut x);
    let (mut fx, mut g) = match f(&x) {
        Probe::Active { value, grad } => (value, grad),
        Probe::Frozen => return Descent { x, value: None, iterations: 0 },
    };
    let mut history: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(cfg.memory);
    let c1 = T::lit(cfg.armijo_c1);
    let half = T::lit(0.5);

    for iter in 0..cfg.max_iters {
        let pg = projected_gradient(&x, &g, bounds);
        if inf_norm(&pg) < T::lit(cfg.grad_tol) {
            return Descent { x, value: Some(fx), iterations: iter };
        }
        let mut d = two_loop(&pg, &history);
        // Coordinates pinned at a bound stay pinned this step.
        d.iter_mut().zip(&pg).for_each(|(di, &p)| {
            if p == T::zero() {
                *di = T::zero();
            }
        });
        if dot(&d, &pg) >= T::zero() {
            history.clear();
            d = pg.iter().map(|&v| -v).collect();
        }
        let mut t = if history.is_empty() { T::one().min(T::lit(cfg.first_step) / inf_norm(&d)) } else { T::one() };

        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let mut trial: Vec<T> = x.iter().zip(&d).map(|(&xi, &di)| xi + t * di).collect();
            clamp(&mut trial);
            match f(&trial) {
                Probe::Frozen => return Descent { x: trial, value: None, iterations: iter + 1 },
                Probe::Active { value, grad } => {
                    let step: Vec<T> = trial.iter().zip(&x).map(|(&a, &b)| a - b).collect();
                    let decrease = dot(&g, &step).min(T::zero());
                    if value <= fx + c1 * decrease && value <= fx {
                        accepted = Some((trial, value, grad, step));
                        break;
                    }
                }
            }
            t *= half;
        }
        let Some((x_new, f_new, g_new, s)) = accepted else {
            return Descent { x, value: Some(fx), iterations: iter + 1 };
        };
        let y: Vec<T> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::epsilon() * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back((s, y, T::one() / sy));
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    Descent { x, value: Some(fx), iterations: cfg.max_iters }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(center: Vec<f64>) -> impl FnMut(&[f64]) -> Probe<f64> {
        move |x: &[f64]| Probe::Active {
            value: x.iter().zip(&center).map(|(a, c)| (a - c).powi(2)).sum(),
            grad: x.iter().zip(&center).map(|(a, c)| 2.0 * (a - c)).collect(),
        }
    }

    fn unit(d: usize) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); d]
    }

    #[test]
    fn interior_minimum() {
        let r = minimize_box(quad(vec![0.3, 0.7]), &[0.9, 0.1], &unit(2), &LbfgsConfig::default());
        assert!((r.x[0] - 0.3).abs() < 1e-6 && (r.x[1] - 0.7).abs() < 1e-6);
    }

    #[test]
    fn minimum_outside_box_lands_on_face() {
        let r = minimize_box(quad(vec![-1.0, 0.4]), &[0.8, 0.9], &unit(2), &LbfgsConfig::default());
        assert_eq!(r.x[0], 0.0);
        assert!((r.x[1] - 0.4).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock_2d_converges() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            Probe::Active {
                value: (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2),
                grad: vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)],
            }
        };
        let cfg = LbfgsConfig { max_iters: 500, ..LbfgsConfig::default() };
        let r = minimize_box(f, &[0.1, 0.1], &[(-2.0, 2.0), (-2.0, 2.0)], &cfg);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn frozen_start_is_returned_unchanged() {
        let r = minimize_box(|_: &[f64]| Probe::Frozen, &[0.25, 0.5], &unit(2), &LbfgsConfig::default());
        assert!(r.is_frozen());
        assert_eq!(r.x, vec![0.25, 0.5]);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn descent_freezes_on_entering_region() {
        // Minimum at 0.9, frozen beyond 0.5.
        let mut inner = quad(vec![0.9]);
        let f = move |x: &[f64]| if x[0] > 0.5 { Probe::Frozen } else { inner(x) };
        let r = minimize_box(f, &[0.1], &unit(1), &LbfgsConfig::default());
        assert!(r.is_frozen());
        assert!(r.x[0] > 0.5);
    }
}
