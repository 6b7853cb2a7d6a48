//! Lookup-table benchmarks over categorical/ordinal configurations.
//!
//! CSV layout: a header naming each coordinate column plus one column named
//! `value`; every following row is one configuration and its (minimized)
//! performance. Each coordinate column becomes one normalized dimension:
//! its distinct levels are ordered numerically when they all parse as
//! numbers, otherwise by first appearance, and level `i` of `L` maps to
//! `i / (L - 1)` (a single level maps to 0).

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::space::SearchSpace;

use super::Objective;

const LEVEL_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct TabularBenchmark<T> {
    name: String,
    columns: Vec<String>,
    levels: Vec<Vec<String>>,
    rows: Vec<Vec<usize>>,
    values: Vec<T>,
    index: HashMap<Vec<usize>, usize>,
    noise_sigma: T,
}

impl<T: Scalar> TabularBenchmark<T> {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("tabular").to_string();
        Self::from_reader(name, std::fs::File::open(path)?)
    }

    pub fn from_reader<R: Read>(name: impl Into<String>, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let value_col = headers
            .iter()
            .position(|h| h == "value")
            .ok_or_else(|| Error::Input("tabular CSV needs a `value` column".into()))?;
        let columns: Vec<String> =
            headers.iter().enumerate().filter(|&(i, _)| i != value_col).map(|(_, h)| h.to_string()).collect();
        if columns.is_empty() {
            return Err(Error::Input("tabular CSV needs at least one coordinate column".into()));
        }

        let mut raw_rows: Vec<Vec<String>> = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = rec.get(value_col).unwrap_or("").trim();
            let v: f64 = field.parse().map_err(|_| Error::Input(format!("row {}: bad value {field:?}", line + 1)))?;
            if !v.is_finite() {
                return Err(Error::Input(format!("row {}: non-finite value", line + 1)));
            }
            values.push(T::lit(v));
            raw_rows.push(
                rec.iter().enumerate().filter(|&(i, _)| i != value_col).map(|(_, s)| s.trim().to_string()).collect(),
            );
        }
        if raw_rows.is_empty() {
            return Err(Error::Input("tabular CSV has no rows".into()));
        }

        let levels: Vec<Vec<String>> = (0..columns.len())
            .map(|c| {
                let mut seen: Vec<String> = Vec::new();
                for r in &raw_rows {
                    if !seen.contains(&r[c]) {
                        seen.push(r[c].clone());
                    }
                }
                if seen.iter().all(|s| s.parse::<f64>().is_ok()) {
                    seen.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
                }
                seen
            })
            .collect();

        let mut index = HashMap::with_capacity(raw_rows.len());
        let mut rows = Vec::with_capacity(raw_rows.len());
        for (i, r) in raw_rows.iter().enumerate() {
            let key: Vec<usize> =
                r.iter().zip(&levels).map(|(s, lv)| lv.iter().position(|l| l == s).unwrap()).collect();
            if index.insert(key.clone(), i).is_some() {
                return Err(Error::Input(format!("duplicate configuration {r:?}")));
            }
            rows.push(key);
        }
        Ok(Self { name: name.into(), columns, levels, rows, values, index, noise_sigma: T::zero() })
    }

    pub fn with_noise(mut self, noise_sigma: T) -> Self {
        self.noise_sigma = noise_sigma;
        self
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn coordinate(level: usize, n_levels: usize) -> T {
        if n_levels <= 1 {
            T::zero()
        } else {
            T::from_usize_lossy(level) / T::from_usize_lossy(n_levels - 1)
        }
    }

    /// Normalized point of row `i`.
    pub fn point(&self, i: usize) -> Vec<T> {
        self.rows[i].iter().zip(&self.levels).map(|(&l, lv)| Self::coordinate(l, lv.len())).collect()
    }

    /// Stored value of row `i`.
    pub fn value(&self, i: usize) -> T {
        self.values[i]
    }

    fn row_of(&self, x: &[T]) -> Result<usize> {
        if x.len() != self.columns.len() {
            return Err(Error::Domain(format!("expected {} coordinates, got {}", self.columns.len(), x.len())));
        }
        let mut key = Vec::with_capacity(x.len());
        for (&c, lv) in x.iter().zip(&self.levels) {
            let n = lv.len();
            let scaled = c * T::from_usize_lossy(n.saturating_sub(1));
            let level = scaled.round().to_usize().filter(|&l| l < n);
            match level {
                Some(l) if (Self::coordinate(l, n) - c).abs() <= T::lit(LEVEL_TOLERANCE) => key.push(l),
                _ => return Err(Error::Domain(format!("{x:?} is not a configuration level"))),
            }
        }
        self.index.get(&key).copied().ok_or_else(|| Error::Domain(format!("configuration {x:?} not in the table")))
    }
}

impl<T: Scalar> Objective<T> for TabularBenchmark<T> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn space(&self) -> SearchSpace<T> {
        SearchSpace::Discrete { candidates: (0..self.len()).map(|i| self.point(i)).collect() }
    }

    fn evaluate(&self, x: &[T], rng: &mut Rng) -> Result<T> {
        let clean = self.true_value(x)?;
        if self.noise_sigma == T::zero() {
            return Ok(clean);
        }
        let z: f64 = StandardNormal.sample(rng);
        Ok(clean + self.noise_sigma * T::lit(z))
    }

    fn true_value(&self, x: &[T]) -> Result<T> {
        Ok(self.values[self.row_of(x)?])
    }

    fn optimum(&self) -> Option<T> {
        self.values.iter().copied().reduce(T::min)
    }

    /// Level indices of the configuration.
    fn raw_point(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(&self.levels)
            .map(|(&c, lv)| (c * T::from_usize_lossy(lv.len().saturating_sub(1))).round())
            .collect()
    }
}
