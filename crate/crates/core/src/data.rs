//! Observation matrices and responsibility-weighted views of them.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Default accuracy of measurement per coordinate.
pub const DEFAULT_EPSILON: f64 = 1e-3;

/// Tolerance on `‖x‖ = 1` for directional data.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// An `n × d` row-major matrix of observations, stated to precision `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    values: Vec<f64>,
    n: usize,
    d: usize,
    epsilon: f64,
    unit: bool,
}

impl DataSet {
    /// Wraps row-major `values` with `d` columns.
    pub fn new(values: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be positive"));
        }
        if values.len() % d != 0 {
            return Err(Error::DimensionMismatch { expected: d, found: values.len() % d });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("data"));
        }
        let n = values.len() / d;
        Ok(DataSet { values, n, d, epsilon: DEFAULT_EPSILON, unit: false })
    }

    /// Wraps rows that must lie on the unit sphere.
    pub fn unit_vectors(values: Vec<f64>, d: usize) -> Result<Self> {
        let mut data = Self::new(values, d)?;
        for row in data.rows() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::Domain("row is not a unit vector"));
            }
        }
        data.unit = true;
        Ok(data)
    }

    /// Scales every non-zero row to unit length.
    pub fn normalized(values: Vec<f64>, d: usize) -> Result<Self> {
        let mut data = Self::new(values, d)?;
        for row in data.values.chunks_exact_mut(d) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::Domain("cannot normalise a zero row"));
            }
            row.iter_mut().for_each(|v| *v /= norm);
        }
        data.unit = true;
        Ok(data)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Domain("epsilon must be positive"));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_unit(&self) -> bool {
        self.unit
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.d)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Data rows paired with per-row weights in `[0, 1]`; `None` means unit weights.
#[derive(Debug, Clone, Copy)]
pub struct WeightedSample<'a> {
    pub data: &'a DataSet,
    pub weights: Option<&'a [f64]>,
}

impl<'a> WeightedSample<'a> {
    pub fn unit(data: &'a DataSet) -> Self {
        WeightedSample { data, weights: None }
    }

    pub fn weighted(data: &'a DataSet, weights: &'a [f64]) -> Result<Self> {
        if weights.len() != data.n() {
            return Err(Error::DimensionMismatch { expected: data.n(), found: weights.len() });
        }
        if weights.iter().any(|w| !(*w >= 0.0 && *w <= 1.0 + 1e-12)) {
            return Err(Error::Domain("weights must lie in [0, 1]"));
        }
        Ok(WeightedSample { data, weights: Some(weights) })
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[i])
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.map_or(self.data.n() as f64, |w| w.iter().sum())
    }

    /// Iterates over `(weight, row)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, &'a [f64])> + '_ {
        let data = self.data;
        (0..data.n()).map(move |i| (self.weight(i), data.row(i)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn shape_and_rows() {
        let d = DataSet::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.row(1), &[3.0, 4.0]);
        assert!(DataSet::new(vec![1.0, 2.0, 3.0], 2).is_err());
        assert!(DataSet::new(vec![f64::NAN], 1).is_err());
    }

    #[test]
    fn unit_validation_and_normalisation() {
        assert!(DataSet::unit_vectors(vec![1.0, 0.0, 0.6, 0.8], 2).is_ok());
        assert!(DataSet::unit_vectors(vec![1.0, 0.1], 2).is_err());
        let d = DataSet::normalized(vec![3.0, 4.0], 2).unwrap();
        assert!(d.is_unit());
        assert!((d.row(0)[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn weights_are_validated() {
        let d = DataSet::new(vec![1.0, 2.0], 1).unwrap();
        assert!(WeightedSample::weighted(&d, &[0.5]).is_err());
        assert!(WeightedSample::weighted(&d, &[0.5, 1.5]).is_err());
        let w = [0.25, 0.5];
        let s = WeightedSample::weighted(&d, &w).unwrap();
        assert_eq!(s.total_weight(), 0.75);
    }
}
