//! The Grenander estimator: maximum likelihood over decreasing densities on
//! `(0, ∞)`, computed as the left derivative of the least concave majorant of
//! a distribution function.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, ShapeError};
use crate::shape::{
    cumulative_diagram, least_concave_majorant, Density, GridDensity, PiecewiseLinearFn,
    PlanarPoints, SortedSample,
};

/// Tolerance on the total mass of a [`StepDensity`].
pub const STEP_MASS_TOL: f64 = 1e-10;

/// Above this value a numeric `∫(log x)±` is treated as divergent.
pub const LOG_MOMENT_OVERFLOW: f64 = 1e6;

/// Grid CDFs are truncated at the first point where they exceed `1 − this`.
pub const CDF_TRUNCATION: f64 = 1e-8;

/// Left-continuous decreasing step density: `levels[j]` on
/// `(breakpoints[j-1], breakpoints[j]]` with an implicit breakpoint at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDensity {
    breakpoints: Vec<f64>,
    levels: Vec<f64>,
}

impl StepDensity {
    pub fn new(breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != levels.len() {
            return invalid("step density needs matching, non-empty breakpoints and levels");
        }
        if !(breakpoints[0] > 0.0)
            || breakpoints.windows(2).any(|w| !(w[0] < w[1]))
            || breakpoints.iter().any(|b| !b.is_finite())
        {
            return invalid("breakpoints must be positive, finite and strictly increasing");
        }
        if levels.iter().any(|l| !(*l > 0.0) || !l.is_finite())
            || levels.windows(2).any(|w| w[1] > w[0])
        {
            return invalid("levels must be positive and nonincreasing");
        }
        let s = Self {
            breakpoints,
            levels,
        };
        let mass = s.mass();
        if (mass - 1.0).abs() > STEP_MASS_TOL {
            return invalid(format!("step density has mass {mass}"));
        }
        Ok(s)
    }

    fn mass(&self) -> f64 {
        let mut prev = 0.0;
        let mut total = 0.0;
        for (b, l) in self.breakpoints.iter().zip(&self.levels) {
            total += l * (b - prev);
            prev = *b;
        }
        total
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Right end of the support.
    pub fn support_max(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }
}

impl Density for StepDensity {
    fn pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) || x > self.support_max() {
            return 0.0;
        }
        self.levels[self.breakpoints.partition_point(|&b| b < x)]
    }

    fn cdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        let mut prev = 0.0;
        let mut total = 0.0;
        for (b, l) in self.breakpoints.iter().zip(&self.levels) {
            if x <= *b {
                return total + l * (x - prev);
            }
            total += l * (b - prev);
            prev = *b;
        }
        1.0
    }

    fn support(&self) -> (f64, f64) {
        (0.0, self.support_max())
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![0.0];
        b.extend_from_slice(&self.breakpoints);
        b
    }
}

fn step_from_majorant(maj: &PiecewiseLinearFn, scale: f64) -> Result<StepDensity> {
    let knots = maj.knots();
    let levels: Vec<f64> = maj.slopes().into_iter().map(|s| s / scale).collect();
    StepDensity::new(knots[1..].to_vec(), levels)
}

/// Grenander estimator of a sample of positive observations.
pub fn grenander_fit(sample: &SortedSample) -> Result<StepDensity> {
    if !(sample.min() > 0.0) {
        return invalid("Grenander estimator needs strictly positive observations");
    }
    let maj = least_concave_majorant(&cumulative_diagram(sample, Some(0.0)))?;
    step_from_majorant(&maj, 1.0)
}

/// Mean log-likelihood `(1/n) Σ w_i log g(x_i)`, with `log 0 = −∞`.
pub fn grenander_loglik(g: &StepDensity, sample: &SortedSample) -> f64 {
    let n = sample.n() as f64;
    let mut total = 0.0;
    for (&x, &w) in sample.values().iter().zip(sample.weights()) {
        let v = g.pdf(x);
        if v <= 0.0 {
            return f64::NEG_INFINITY;
        }
        total += w * v.ln();
    }
    total / n
}

/// Behaviour of the supremum of the log-likelihood functional over decreasing
/// densities, determined by the integrals `∫(log x)± dQ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LikelihoodRegime {
    /// `∫|log x| dQ < ∞`: the supremum is finite and attained.
    Finite,
    /// `∫(log x)₊ < ∞ = ∫(log x)₋`: mass piles up near zero.
    PlusInfinity,
    /// `∫(log x)₊ = ∞`: mass escapes to infinity.
    MinusInfinity,
}

/// Classifies numeric values of `∫(log x)₋ dQ` and `∫(log x)₊ dQ`, treating
/// anything above [`LOG_MOMENT_OVERFLOW`] (or non-finite) as divergent.
pub fn classify_log_moments(neg: f64, pos: f64) -> LikelihoodRegime {
    let diverges = |v: f64| !v.is_finite() || v > LOG_MOMENT_OVERFLOW;
    if diverges(pos) {
        LikelihoodRegime::MinusInfinity
    } else if diverges(neg) {
        LikelihoodRegime::PlusInfinity
    } else {
        LikelihoodRegime::Finite
    }
}

/// Numeric `(∫(log x)₋ dQ, ∫(log x)₊ dQ)` for a grid density on `[0, ∞)`.
pub fn log_moments(g: &GridDensity) -> Result<(f64, f64)> {
    let grid = g.grid();
    if grid[0] < 0.0 {
        return invalid("density must be supported in [0, ∞)");
    }
    let dens = g.density();
    let (mut neg, mut pos) = (0.0, 0.0);
    for i in 0..grid.len() - 1 {
        let (a, b) = (grid[i], grid[i + 1]);
        let (da, db) = (dens[i], dens[i + 1]);
        if da == 0.0 && db == 0.0 {
            continue;
        }
        // split at 1 so that each piece has a single sign of log x
        let cuts: Vec<f64> = if a < 1.0 && b > 1.0 {
            vec![a, 1.0, b]
        } else {
            vec![a, b]
        };
        for c in cuts.windows(2) {
            let f = |x: f64| {
                let t = (x - a) / (b - a);
                (da + t * (db - da)) * x.ln()
            };
            let v = if c[0] == 0.0 {
                // ∫₀^c (p + q x) ln x dx in closed form for the singular cell
                let q = (db - da) / (b - a);
                let p = da - q * a;
                let e = c[1];
                p * (e * e.ln() - e) + q * (0.5 * e * e * e.ln() - 0.25 * e * e)
            } else {
                crate::quad::gauss_legendre(&f, c[0], c[1])
            };
            if c[1] <= 1.0 {
                neg -= v;
            } else {
                pos += v;
            }
        }
    }
    Ok((neg.max(0.0), pos.max(0.0)))
}

/// Population Grenander projection of a grid density on `[0, ∞)`.
///
/// The grid CDF is truncated where it first exceeds `1 − 1e-8` and the
/// majorant's slopes are rescaled to unit mass. Measures whose log-likelihood
/// supremum is infinite are reported through
/// [`ShapeError::UnboundedLikelihood`].
pub fn grenander_project_cdf(g: &GridDensity) -> Result<StepDensity> {
    let (neg, pos) = log_moments(g)?;
    let regime = classify_log_moments(neg, pos);
    if regime != LikelihoodRegime::Finite {
        return Err(ShapeError::UnboundedLikelihood(regime));
    }
    let grid = g.grid();
    let cdf = g.cdf_values();
    let total = *cdf.last().unwrap();
    let end = cdf
        .iter()
        .position(|&c| c / total > 1.0 - CDF_TRUNCATION)
        .unwrap_or(cdf.len() - 1);
    let mut x = Vec::with_capacity(end + 2);
    let mut y = Vec::with_capacity(end + 2);
    if grid[0] > 0.0 {
        x.push(0.0);
        y.push(0.0);
    }
    x.extend_from_slice(&grid[..=end]);
    y.extend(cdf[..=end].iter().map(|c| c / total));
    let maj = least_concave_majorant(&PlanarPoints::new(x, y)?)?;
    let top = *maj.vals().last().unwrap();
    if !(top > 0.0) {
        return Err(ShapeError::Degenerate("grid density has no mass".into()));
    }
    step_from_majorant(&maj, top)
}
