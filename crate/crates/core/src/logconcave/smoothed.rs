use serde::{Deserialize, Serialize};
use libm::erfc;

use super::density::LogLinearDensity;
use super::mle::logconcave_mle;
use crate::error::{Result, ShapeError};
use crate::quad::adaptive;
use crate::shape::{Density, SortedSample};

/// Roundoff allowance below zero for the smoothing variance.
pub const A_HAT_FLOOR: f64 = -1e-10;

/// The log-concave MLE convolved with a centred Gaussian of variance `a_hat`,
/// which restores the sample variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedLogConcave {
    pub base: LogLinearDensity,
    pub a_hat: f64,
}

/// `log Φ(z)`, accurate far into the lower tail.
fn log_ndtr(z: f64) -> f64 {
    if z > -30.0 {
        return (0.5 * erfc(-z / std::f64::consts::SQRT_2)).ln();
    }
    // asymptotic expansion of the Mills ratio
    let z2 = z * z;
    let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2)
        + 105.0 / (z2 * z2 * z2 * z2);
    -0.5 * z2 - 0.5 * (2.0 * std::f64::consts::PI).ln() - (-z).ln() + series.ln()
}

/// `log(Φ(b) − Φ(a))` for `a < b`, avoiding cancellation in either tail.
fn log_ndtr_diff(a: f64, b: f64) -> f64 {
    if a >= b {
        return f64::NEG_INFINITY;
    }
    if a > 0.0 {
        return log_ndtr_diff(-b, -a);
    }
    if b <= 0.0 {
        let (la, lb) = (log_ndtr(a), log_ndtr(b));
        return lb + (-(la - lb).exp_m1()).ln();
    }
    // straddles zero: both tails are at most one half
    let lower = 0.5 * erfc(-a / std::f64::consts::SQRT_2);
    let upper = 0.5 * erfc(b / std::f64::consts::SQRT_2);
    (1.0 - lower - upper).ln()
}

impl SmoothedLogConcave {
    pub fn new(base: LogLinearDensity, a_hat: f64) -> Result<Self> {
        if !(a_hat >= 0.0) || !a_hat.is_finite() {
            return Err(ShapeError::InvalidArgument(format!(
                "smoothing variance must be ≥ 0, got {a_hat}"
            )));
        }
        Ok(Self { base, a_hat })
    }

    /// Mean and variance: the base mean, and the base variance plus `a_hat`.
    pub fn moments(&self) -> (f64, f64) {
        let (m, v) = self.base.moments();
        (m, v + self.a_hat)
    }

    fn sigma(&self) -> f64 {
        self.a_hat.sqrt()
    }
}

/// Smoothed log-concave MLE of a sample.
pub fn smoothed_mle(sample: &SortedSample) -> Result<SmoothedLogConcave> {
    let base = logconcave_mle(sample)?;
    let (_, v) = base.moments();
    let a = sample.variance() - v;
    if a < A_HAT_FLOOR {
        return Err(ShapeError::Numerical(format!(
            "fitted variance exceeds the sample variance by {}",
            -a
        )));
    }
    SmoothedLogConcave::new(base, a.max(0.0))
}

impl Density for SmoothedLogConcave {
    fn pdf(&self, x: f64) -> f64 {
        if self.a_hat == 0.0 {
            return self.base.pdf(x);
        }
        let s = self.sigma();
        let s2 = self.a_hat;
        let knots = self.base.knots();
        let vals = self.base.logvals();
        let mut total = 0.0;
        for j in 0..knots.len() - 1 {
            let (ta, tb) = (knots[j], knots[j + 1]);
            let beta = (vals[j + 1] - vals[j]) / (tb - ta);
            // ∫ e^{φa + β(u − ta)} φ_σ(x − u) du over [ta, tb]
            let shift = x + beta * s2;
            let lo = (ta - shift) / s;
            let hi = (tb - shift) / s;
            let log_term = vals[j] + beta * (x - ta) + 0.5 * beta * beta * s2 + log_ndtr_diff(lo, hi);
            total += log_term.exp();
        }
        total
    }

    fn cdf(&self, x: f64) -> f64 {
        if self.a_hat == 0.0 {
            return self.base.cdf(x);
        }
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        let top = x.min(hi);
        let mut pts = vec![lo];
        pts.extend(self.base.knots().iter().copied().filter(|&k| k > lo && k < top));
        pts.push(top);
        let v: f64 = pts
            .windows(2)
            .map(|w| adaptive(&|u| self.pdf(u), w[0], w[1], 1e-14, 1e-12))
            .sum();
        v.min(1.0)
    }

    fn support(&self) -> (f64, f64) {
        let (a, b) = self.base.support();
        let pad = 12.0 * self.sigma();
        (a - pad, b + pad)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.base.knots().to_vec()
    }
}
