use serde::{Deserialize, Serialize};

use super::segment::seg_moment;
use crate::error::{invalid, Result};
use crate::shape::Density;

/// Slack on slope differences when checking concavity of the log-density.
pub const LOG_CONCAVITY_TOL: f64 = 1e-10;

/// Tolerance on the total mass of a [`LogLinearDensity`].
pub const LOG_LINEAR_MASS_TOL: f64 = 1e-8;

/// Density whose logarithm is the linear interpolant of `(knots, logvals)` on
/// `[knots[0], knots[m-1]]`, and zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LogLinearRaw", into = "LogLinearRaw")]
pub struct LogLinearDensity {
    knots: Vec<f64>,
    logvals: Vec<f64>,
    /// Cumulative mass at each knot.
    cum: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LogLinearRaw {
    knots: Vec<f64>,
    logvals: Vec<f64>,
}

impl TryFrom<LogLinearRaw> for LogLinearDensity {
    type Error = crate::ShapeError;

    fn try_from(raw: LogLinearRaw) -> Result<Self> {
        Self::new(raw.knots, raw.logvals)
    }
}

impl From<LogLinearDensity> for LogLinearRaw {
    fn from(d: LogLinearDensity) -> Self {
        Self {
            knots: d.knots,
            logvals: d.logvals,
        }
    }
}

/// Mass of each segment between consecutive knots.
pub(crate) fn segment_masses(knots: &[f64], logvals: &[f64]) -> Vec<f64> {
    knots
        .windows(2)
        .zip(logvals.windows(2))
        .map(|(k, v)| (k[1] - k[0]) * seg_moment(0, 0, v[0], v[1]))
        .collect()
}

impl LogLinearDensity {
    /// Validates concavity and unit mass.
    pub fn new(knots: Vec<f64>, logvals: Vec<f64>) -> Result<Self> {
        let d = Self::unchecked(knots, logvals)?;
        if !d.is_concave() {
            return invalid("log-density is not concave");
        }
        let mass = d.mass();
        if (mass - 1.0).abs() > LOG_LINEAR_MASS_TOL {
            return invalid(format!("density integrates to {mass}"));
        }
        Ok(d)
    }

    /// Builds the density after shifting `logvals` so the mass is one.
    pub fn normalized(knots: Vec<f64>, mut logvals: Vec<f64>) -> Result<Self> {
        let raw = Self::unchecked(knots.clone(), logvals.clone())?;
        let shift = raw.mass().ln();
        for v in &mut logvals {
            *v -= shift;
        }
        Self::new(knots, logvals)
    }

    fn unchecked(knots: Vec<f64>, logvals: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != logvals.len() {
            return invalid("log-linear density needs ≥ 2 knots and matching values");
        }
        if knots.windows(2).any(|w| !(w[0] < w[1]))
            || knots.iter().chain(&logvals).any(|v| !v.is_finite())
        {
            return invalid("knots must be finite and strictly increasing, logvals finite");
        }
        let mut cum = Vec::with_capacity(knots.len());
        cum.push(0.0);
        let mut acc = 0.0;
        for m in segment_masses(&knots, &logvals) {
            acc += m;
            cum.push(acc);
        }
        Ok(Self {
            knots,
            logvals,
            cum,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn logvals(&self) -> &[f64] {
        &self.logvals
    }

    pub fn mass(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    /// Slopes are nonincreasing up to [`LOG_CONCAVITY_TOL`], widened where
    /// knots are so close that rounding of the stored values alone moves a
    /// slope by more than that.
    pub fn is_concave(&self) -> bool {
        let (k, v) = (&self.knots, &self.logvals);
        let slopes = self.slopes();
        // values carry errors on the scale of the largest value, knots on the
        // scale of the largest abscissa
        let mag = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let kmag = k.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        (1..k.len() - 1).all(|i| {
            let gap = (k[i] - k[i - 1]).min(k[i + 1] - k[i]);
            let steep = slopes[i].abs().max(slopes[i - 1].abs());
            let roundoff = 16.0 * f64::EPSILON * (mag + steep * kmag) / gap;
            slopes[i] <= slopes[i - 1] + LOG_CONCAVITY_TOL.max(roundoff)
        })
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.knots
            .windows(2)
            .zip(self.logvals.windows(2))
            .map(|(k, v)| (v[1] - v[0]) / (k[1] - k[0]))
            .collect()
    }

    fn segment(&self, x: f64) -> usize {
        (self.knots.partition_point(|&k| k <= x).max(1) - 1).min(self.knots.len() - 2)
    }

    /// Log-density, `−∞` outside the support.
    pub fn log_pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x >= lo && x <= hi) {
            return f64::NEG_INFINITY;
        }
        let j = self.segment(x);
        let (k0, k1) = (self.knots[j], self.knots[j + 1]);
        if x == k1 {
            return self.logvals[j + 1];
        }
        let t = (x - k0) / (k1 - k0);
        self.logvals[j] + t * (self.logvals[j + 1] - self.logvals[j])
    }

    /// Mean and variance from closed-form segment moments.
    pub fn moments(&self) -> (f64, f64) {
        let mass = self.mass();
        let mut first = 0.0;
        for j in 0..self.knots.len() - 1 {
            let h = self.knots[j + 1] - self.knots[j];
            let (r, t) = (self.logvals[j], self.logvals[j + 1]);
            first += self.knots[j] * h * seg_moment(0, 0, r, t) + h * h * seg_moment(0, 1, r, t);
        }
        let mean = first / mass;
        let mut second = 0.0;
        for j in 0..self.knots.len() - 1 {
            let h = self.knots[j + 1] - self.knots[j];
            let (r, t) = (self.logvals[j], self.logvals[j + 1]);
            let c = self.knots[j] - mean;
            second += c * c * h * seg_moment(0, 0, r, t)
                + 2.0 * c * h * h * seg_moment(0, 1, r, t)
                + h * h * h * seg_moment(0, 2, r, t);
        }
        (mean, (second / mass).max(0.0))
    }

    /// Density of `a·X + b` for `X` with this density (`a ≠ 0`).
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() || !b.is_finite() {
            return invalid("affine map needs finite a ≠ 0 and finite b");
        }
        let shift = a.abs().ln();
        let mut pairs: Vec<(f64, f64)> = self
            .knots
            .iter()
            .zip(&self.logvals)
            .map(|(k, v)| (a * k + b, v - shift))
            .collect();
        if a < 0.0 {
            pairs.reverse();
        }
        let (knots, logvals) = pairs.into_iter().unzip();
        Self::normalized(knots, logvals)
    }

    /// Affine image with mean 0 and variance 1.
    pub fn standardized(&self) -> Result<Self> {
        let (m, v) = self.moments();
        let sd = v.sqrt();
        if !(sd > 0.0) {
            return invalid("density has zero variance");
        }
        self.affine(1.0 / sd, -m / sd)
    }
}

impl Density for LogLinearDensity {
    fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return self.mass();
        }
        let j = self.segment(x);
        let k0 = self.knots[j];
        if x == k0 {
            return self.cum[j];
        }
        let fx = self.log_pdf(x);
        self.cum[j] + (x - k0) * seg_moment(0, 0, self.logvals[j], fx)
    }

    fn support(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.knots.clone()
    }
}
