use serde::{Deserialize, Serialize};

use super::density::DistributionFunction;
use crate::error::{invalid, Result};

/// Sorted distinct observations with multiplicities: an empirical measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
    n: usize,
}

impl SortedSample {
    /// Sorts `data` and merges exact duplicates into integer weights.
    pub fn new(data: &[f64]) -> Result<Self> {
        if data.is_empty() {
            return invalid("sample must contain at least one observation");
        }
        if data.iter().any(|x| !x.is_finite()) {
            return invalid("sample contains non-finite values");
        }
        let mut sorted = data.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut weights: Vec<f64> = Vec::with_capacity(sorted.len());
        for x in sorted {
            match values.last() {
                Some(&last) if last == x => *weights.last_mut().unwrap() += 1.0,
                _ => {
                    values.push(x);
                    weights.push(1.0);
                }
            }
        }
        Ok(Self {
            values,
            weights,
            n: data.len(),
        })
    }

    /// Builds a sample from already-merged support points and multiplicities.
    pub fn from_weighted(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return invalid("values and weights must be non-empty and of equal length");
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) || values.iter().any(|v| !v.is_finite()) {
            return invalid("values must be finite and strictly increasing");
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return invalid("weights must be positive");
        }
        let total: f64 = weights.iter().sum();
        let n = total.round();
        if (total - n).abs() > 1e-9 * total.max(1.0) || n < 1.0 {
            return invalid("weights must sum to a positive integer");
        }
        Ok(Self {
            values,
            weights,
            n: n as usize,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total number of observations (sum of multiplicities).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of distinct support points.
    pub fn distinct(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Weights divided by `n`, i.e. the empirical probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.weights.iter().map(|w| w / n).collect()
    }

    pub fn mean(&self) -> f64 {
        let n = self.n as f64;
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x * w)
            .sum::<f64>()
            / n
    }

    /// Variance with the `1/n` denominator.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let n = self.n as f64;
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * (x - m) * (x - m))
            .sum::<f64>()
            / n
    }

    /// Image of the sample under `x ↦ a·x + b` with `a ≠ 0`.
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() || !b.is_finite() {
            return invalid("affine map needs finite a ≠ 0 and finite b");
        }
        let mut pairs: Vec<(f64, f64)> = self
            .values
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| (a * x + b, *w))
            .collect();
        if a < 0.0 {
            pairs.reverse();
        }
        let (values, weights) = pairs.into_iter().unzip();
        Self::from_weighted(values, weights)
    }

    pub fn ecdf(&self) -> EmpiricalCdf<'_> {
        EmpiricalCdf { sample: self }
    }
}

/// Right-continuous empirical distribution function of a [`SortedSample`].
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalCdf<'a> {
    sample: &'a SortedSample,
}

impl EmpiricalCdf<'_> {
    fn mass_where(&self, pred: impl Fn(f64) -> bool) -> f64 {
        let k = self.sample.values.partition_point(|&v| pred(v));
        self.sample.weights[..k].iter().sum::<f64>() / self.sample.n as f64
    }
}

impl DistributionFunction for EmpiricalCdf<'_> {
    fn value(&self, x: f64) -> f64 {
        self.mass_where(|v| v <= x)
    }

    fn left_limit(&self, x: f64) -> f64 {
        self.mass_where(|v| v < x)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.sample.values.clone()
    }

    fn is_piecewise_linear(&self) -> bool {
        true
    }

    fn span(&self) -> (f64, f64) {
        (self.sample.min(), self.sample.max())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_become_weights() {
        let s = SortedSample::new(&[2.0, 1.0, 2.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.weights(), &[1.0, 3.0, 1.0]);
        assert_eq!(s.n(), 5);
        assert!((s.mean() - 2.0).abs() < 1e-15);
        assert!((s.variance() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SortedSample::new(&[]).is_err());
        assert!(SortedSample::new(&[1.0, f64::NAN]).is_err());
        assert!(SortedSample::from_weighted(vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(SortedSample::from_weighted(vec![1.0, 2.0], vec![1.0, 0.0]).is_err());
        assert!(SortedSample::from_weighted(vec![1.0, 2.0], vec![1.0, 0.5]).is_err());
    }

    #[test]
    fn negative_affine_map_reverses_order() {
        let s = SortedSample::new(&[0.0, 1.0, 1.0, 4.0]).unwrap();
        let t = s.affine(-2.0, 1.0).unwrap();
        assert_eq!(t.values(), &[-7.0, -1.0, 1.0]);
        assert_eq!(t.weights(), &[1.0, 2.0, 1.0]);
    }

    #[test]
    fn ecdf_limits() {
        let s = SortedSample::new(&[1.0, 1.0, 2.0, 3.0]).unwrap();
        let f = s.ecdf();
        assert_eq!(f.value(1.0), 0.5);
        assert_eq!(f.left_limit(1.0), 0.0);
        assert_eq!(f.value(2.5), 0.75);
        assert_eq!(f.value(10.0), 1.0);
    }
}
