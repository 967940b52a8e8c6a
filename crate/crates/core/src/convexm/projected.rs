use serde::Serialize;

use super::model::DensityModel;
use super::score::{antitonic_score, ScoreFn};
use crate::error::{Result, ShapeError};
use crate::logconcave::exp_segment_integral;
use crate::shape::Density;

/// Tail mass below which the working support of a projected density is cut.
const PROJECTED_TAIL: f64 = 1e-13;

/// Continuous log-concave density whose log is piecewise linear, with linear
/// log-tails where the support is unbounded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectedDensity {
    knots: Vec<f64>,
    logvals: Vec<f64>,
    /// Tail slopes of the log-density; `None` means zero density beyond the
    /// outer knot.
    left_slope: Option<f64>,
    right_slope: Option<f64>,
    /// Cumulative mass at each knot.
    cum: Vec<f64>,
}

impl ProjectedDensity {
    /// Integrates a decreasing score into a concave log-density and
    /// normalizes it.
    pub fn from_score(psi: &ScoreFn) -> Result<Self> {
        let z = psi.zknots();
        let s = psi.slopes();
        let (mut knots, mut slopes_between) = (Vec::new(), Vec::new());
        for (k, &zk) in z.iter().enumerate() {
            if !zk.is_finite() {
                continue;
            }
            match knots.last() {
                Some(&last) if zk <= last => {}
                _ => {
                    if !knots.is_empty() {
                        slopes_between.push(s[k - 1]);
                    }
                    knots.push(zk);
                }
            }
        }
        if knots.is_empty() {
            return Err(ShapeError::Degenerate("score has no finite knots".into()));
        }
        let left_slope = (!z[0].is_finite()).then_some(s[0]);
        let right_slope = (!z[z.len() - 1].is_finite()).then(|| s[s.len() - 1]);
        if left_slope.is_some_and(|v| !(v > 0.0)) || right_slope.is_some_and(|v| !(v < 0.0)) {
            return Err(ShapeError::Numerical("exponentiated score is not integrable".into()));
        }
        if knots.len() < 2 && (left_slope.is_none() || right_slope.is_none()) {
            return Err(ShapeError::Degenerate("projected density has empty support".into()));
        }
        let mut logvals = Vec::with_capacity(knots.len());
        logvals.push(0.0);
        for i in 1..knots.len() {
            logvals.push(logvals[i - 1] + slopes_between[i - 1] * (knots[i] - knots[i - 1]));
        }
        let mut d = Self { knots, logvals, left_slope, right_slope, cum: Vec::new() };
        let total = d.raw_cumulative()?;
        let shift = total.ln();
        for v in &mut d.logvals {
            *v -= shift;
        }
        d.raw_cumulative()?;
        Ok(d)
    }

    /// Fills `cum` and returns the total mass.
    fn raw_cumulative(&mut self) -> Result<f64> {
        let left = self.left_slope.map_or(0.0, |s| self.logvals[0].exp() / s);
        let mut cum = Vec::with_capacity(self.knots.len());
        cum.push(left);
        for i in 1..self.knots.len() {
            let m = exp_segment_integral(
                self.knots[i - 1],
                self.knots[i],
                self.logvals[i - 1],
                self.logvals[i],
            )?;
            cum.push(cum[i - 1] + m);
        }
        let right = self.right_slope.map_or(0.0, |s| -self.logvals.last().unwrap().exp() / s);
        let total = cum.last().unwrap() + right;
        self.cum = cum;
        if !(total.is_finite() && total > 0.0) {
            return Err(ShapeError::Numerical(format!("projected density mass {total}")));
        }
        Ok(total)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn logvals(&self) -> &[f64] {
        &self.logvals
    }

    pub fn tail_slopes(&self) -> (Option<f64>, Option<f64>) {
        (self.left_slope, self.right_slope)
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let k = &self.knots;
        let last = k.len() - 1;
        if x < k[0] {
            return self.left_slope.map_or(f64::NEG_INFINITY, |s| self.logvals[0] + s * (x - k[0]));
        }
        if x > k[last] {
            return self
                .right_slope
                .map_or(f64::NEG_INFINITY, |s| self.logvals[last] + s * (x - k[last]));
        }
        if last == 0 {
            return self.logvals[0];
        }
        let i = (k.partition_point(|&v| v <= x).max(1) - 1).min(last - 1);
        let t = (x - k[i]) / (k[i + 1] - k[i]);
        self.logvals[i] + t * (self.logvals[i + 1] - self.logvals[i])
    }

    /// Right derivative of the log-density.
    pub fn log_slope(&self, x: f64) -> f64 {
        let k = &self.knots;
        let last = k.len() - 1;
        if x < k[0] {
            return self.left_slope.unwrap_or(0.0);
        }
        if x >= k[last] {
            return self.right_slope.unwrap_or(f64::NEG_INFINITY);
        }
        let i = k.partition_point(|&v| v <= x) - 1;
        (self.logvals[i + 1] - self.logvals[i]) / (k[i + 1] - k[i])
    }
}

impl Density for ProjectedDensity {
    fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    fn cdf(&self, x: f64) -> f64 {
        let k = &self.knots;
        let last = k.len() - 1;
        if x < k[0] {
            return self.left_slope.map_or(0.0, |s| self.log_pdf(x).exp() / s);
        }
        if x >= k[last] {
            let tail = self.right_slope.map_or(0.0, |s| -self.log_pdf(x).exp() / s);
            return (1.0 - tail).clamp(0.0, 1.0);
        }
        let i = k.partition_point(|&v| v <= x) - 1;
        let part = if x > k[i] {
            exp_segment_integral(k[i], x, self.logvals[i], self.log_pdf(x)).unwrap_or(0.0)
        } else {
            0.0
        };
        (self.cum[i] + part).clamp(0.0, 1.0)
    }

    fn support(&self) -> (f64, f64) {
        let k = &self.knots;
        let last = k.len() - 1;
        let lo = match self.left_slope {
            Some(s) => k[0] + ((PROJECTED_TAIL * s).ln() - self.logvals[0]).min(0.0) / s,
            None => k[0],
        };
        let hi = match self.right_slope {
            Some(s) => k[last] + ((-PROJECTED_TAIL * s).ln() - self.logvals[last]).min(0.0) / s,
            None => k[last],
        };
        (lo, hi)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.knots.clone()
    }
}

/// Log-concave projection `f₀*`: the continuous log-concave density whose
/// log has right derivative `ψ₀*`.
pub fn projected_density(model: &DensityModel) -> Result<ProjectedDensity> {
    ProjectedDensity::from_score(&antitonic_score(model)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logconcave::is_log_concave;
    use crate::shape::GridDensity;

    fn sup_diff(a: &ProjectedDensity, m: &DensityModel, lo: f64, hi: f64) -> f64 {
        (0..=4000)
            .map(|i| lo + (hi - lo) * i as f64 / 4000.0)
            .map(|x| (a.pdf(x) - m.pdf(x)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn fixed_points_of_log_concave_families() {
        for m in [DensityModel::Gaussian, DensityModel::Laplace, DensityModel::Logistic] {
            let p = projected_density(&m).unwrap();
            let d = sup_diff(&p, &m, -8.0, 8.0);
            assert!(d < 1e-3, "{m:?}: {d}");
        }
    }

    #[test]
    fn cauchy_projection_has_linear_log_tails() {
        let psi = antitonic_score(&DensityModel::Cauchy).unwrap();
        let p = ProjectedDensity::from_score(&psi).unwrap();
        let (l, r) = p.tail_slopes();
        assert_eq!(l, Some(psi.slopes()[0]));
        assert_eq!(r, Some(*psi.slopes().last().unwrap()));
        let (lo, hi) = p.support();
        let g = GridDensity::from_fn(lo, hi, 4001, |x| p.pdf(x)).unwrap();
        assert!(is_log_concave(&g).unwrap());
        // log-density is exactly linear beyond the outer knots
        let z = p.knots()[0];
        let a = p.log_pdf(z - 1.0) - p.log_pdf(z - 2.0);
        let b = p.log_pdf(z - 5.0) - p.log_pdf(z - 6.0);
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn log_derivative_matches_score() {
        let m = DensityModel::Cauchy;
        let psi = antitonic_score(&m).unwrap();
        let p = ProjectedDensity::from_score(&psi).unwrap();
        for &x in &[-7.0, -2.0, -0.4, 0.1, 0.9, 3.0, 12.0] {
            let h = 1e-7;
            let fd = (p.log_pdf(x + h) - p.log_pdf(x)) / h;
            assert!((fd - psi.eval(x)).abs() < 1e-4, "x={x}: {fd} vs {}", psi.eval(x));
        }
    }

    #[test]
    fn cdf_is_consistent_with_pdf() {
        let p = projected_density(&DensityModel::Cauchy).unwrap();
        let (lo, hi) = p.support();
        assert!(p.cdf(lo) < 1e-12 && p.cdf(hi) > 1.0 - 1e-12);
        let a = p.cdf(0.7) - p.cdf(-0.3);
        let b = crate::quad::adaptive(&|x| p.pdf(x), -0.3, 0.7, 1e-14, 1e-12);
        assert!((a - b).abs() < 1e-10);
    }
}
