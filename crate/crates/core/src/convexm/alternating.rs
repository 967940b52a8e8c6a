use serde::Serialize;

use super::efficiency::pl_stieltjes;
use super::loss::ConvexLoss;
use super::mest::{lad_pilot, m_estimate_from, LinearModelData, MEstimate};
use super::model::{std_normal_cdf, std_normal_pdf};
use super::score::ScoreFn;
use crate::error::{invalid, Result, ShapeError};

/// Kernel truncation in bandwidth units.
const KERNEL_CUTOFF: f64 = 5.0;

/// How the residual density estimate treats symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetry {
    /// Symmetric without an intercept; otherwise free, with the intercept
    /// re-centred each round so the residual median is zero.
    Auto,
    /// Average `f̂(z)` and `f̂(−z)`; the intercept then estimates the centre
    /// of symmetry.
    Symmetric,
    /// Use the kernel estimate as is, re-centring the intercept by the
    /// residual median.
    Free,
}

/// Settings of [`alternating_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlternatingConfig {
    pub max_rounds: usize,
    pub symmetry: Symmetry,
    /// Relative change in β below which the iteration stops.
    pub tol: f64,
    /// Number of residual quantiles at which the density quantile function
    /// of the kernel estimate is evaluated.
    pub eval_points: usize,
}

impl Default for AlternatingConfig {
    fn default() -> Self {
        Self { max_rounds: 10, symmetry: Symmetry::Auto, tol: 1e-6, eval_points: 1024 }
    }
}

/// Result of [`alternating_fit`].
#[derive(Debug, Clone, Serialize)]
pub struct AlternatingFit {
    #[serde(flatten)]
    pub estimate: MEstimate,
    pub score: ScoreFn,
    pub rounds: usize,
    pub bandwidth: f64,
}

/// Gaussian kernel density estimate truncated at five bandwidths, optionally
/// symmetrized about zero.
struct Kde {
    points: Vec<f64>,
    h: f64,
    symmetric: bool,
    norm: f64,
}

impl Kde {
    fn new(residuals: &[f64], symmetric: bool) -> Result<Self> {
        let n = residuals.len();
        let mut points = residuals.to_vec();
        points.sort_by(f64::total_cmp);
        let mean = points.iter().sum::<f64>() / n as f64;
        let sd = (points.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        let q = |p: f64| {
            let t = p * (n - 1) as f64;
            let i = t.floor() as usize;
            let j = (i + 1).min(n - 1);
            points[i] + (t - i as f64) * (points[j] - points[i])
        };
        let iqr = q(0.75) - q(0.25);
        let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
        let h = 0.9 * spread * (n as f64).powf(-0.2);
        if !(h > 0.0 && h.is_finite()) {
            return Err(ShapeError::Degenerate("kernel bandwidth collapsed: residuals are equal".into()));
        }
        let norm = std_normal_cdf(KERNEL_CUTOFF) - std_normal_cdf(-KERNEL_CUTOFF);
        Ok(Self { points, h, symmetric, norm })
    }

    fn raw_pdf(&self, z: f64) -> f64 {
        let w = KERNEL_CUTOFF * self.h;
        let lo = self.points.partition_point(|&p| p < z - w);
        let hi = self.points.partition_point(|&p| p <= z + w);
        let s: f64 = self.points[lo..hi]
            .iter()
            .map(|&p| std_normal_pdf((z - p) / self.h))
            .sum();
        s / (self.points.len() as f64 * self.h * self.norm)
    }

    fn raw_cdf(&self, z: f64) -> f64 {
        let w = KERNEL_CUTOFF * self.h;
        let lo = self.points.partition_point(|&p| p < z - w);
        let hi = self.points.partition_point(|&p| p <= z + w);
        let base = std_normal_cdf(-KERNEL_CUTOFF);
        let s: f64 = self.points[lo..hi]
            .iter()
            .map(|&p| (std_normal_cdf((z - p) / self.h) - base) / self.norm)
            .sum();
        ((lo as f64 + s) / self.points.len() as f64).clamp(0.0, 1.0)
    }

    fn pdf(&self, z: f64) -> f64 {
        if self.symmetric {
            0.5 * (self.raw_pdf(z) + self.raw_pdf(-z))
        } else {
            self.raw_pdf(z)
        }
    }

    fn cdf(&self, z: f64) -> f64 {
        if self.symmetric {
            0.5 * (self.raw_cdf(z) + 1.0 - self.raw_cdf(-z))
        } else {
            self.raw_cdf(z)
        }
    }

    /// Antitonic score of the estimate: majorant of the parametric curve
    /// `(F̂(z), f̂(z))` over residual quantiles, closed by `(0, 0)` and `(1, 0)`.
    fn antitonic_score(&self, eval_points: usize) -> Result<ScoreFn> {
        let mut pts = self.points.clone();
        if self.symmetric {
            pts.extend(self.points.iter().map(|v| -v));
            pts.sort_by(f64::total_cmp);
        }
        let m = pts.len();
        let g = eval_points.clamp(2, m);
        let w = KERNEL_CUTOFF * self.h;
        let mut z = vec![pts[0] - w];
        for k in 0..g {
            let idx = ((k as f64) * (m - 1) as f64 / (g - 1) as f64).round() as usize;
            z.push(pts[idx]);
        }
        z.push(pts[m - 1] + w);
        z.dedup();
        let (mut uu, mut jj, mut zz) = (vec![0.0], vec![0.0], vec![z[0]]);
        for &zi in &z[1..z.len() - 1] {
            let u = self.cdf(zi);
            if u > *uu.last().unwrap() && u < 1.0 {
                uu.push(u);
                jj.push(self.pdf(zi));
                zz.push(zi);
            }
        }
        uu.push(1.0);
        jj.push(0.0);
        zz.push(*z.last().unwrap());
        let mid = |i: usize| 0.5 * (zz[i] + zz[i + 1]);
        ScoreFn::from_points(&uu, &jj, &zz, &mid, (f64::NEG_INFINITY, f64::INFINITY))
    }
}

/// Data-driven convex M-estimation: alternates between estimating the
/// antitonic score of the residual density and minimizing the induced convex
/// loss.
///
/// Starts from a rough least-absolute-deviations fit. Each round fits a Gaussian kernel estimate
/// with Silverman bandwidth to the residuals (symmetrized according to
/// [`Symmetry`]), projects its score, and refits β. Stops when
/// `‖Δβ‖ < tol·(1 + ‖β‖)` or after `max_rounds`.
pub fn alternating_fit(data: &LinearModelData, config: &AlternatingConfig) -> Result<AlternatingFit> {
    if config.max_rounds == 0 {
        return invalid("alternating fit needs at least one round");
    }
    let symmetric = match config.symmetry {
        Symmetry::Auto => !data.has_intercept(),
        Symmetry::Symmetric => true,
        Symmetry::Free => false,
    };
    if !symmetric && !data.has_intercept() {
        return invalid("an unsymmetrized fit needs an intercept column");
    }
    let mut beta = lad_pilot(data)?;
    if !symmetric {
        recentre(data, &mut beta);
    }
    let mut rounds = 0;
    let mut last: Option<(MEstimate, ScoreFn, ConvexLoss, Kde)> = None;
    while rounds < config.max_rounds {
        rounds += 1;
        let kde = Kde::new(&data.residuals(&beta), symmetric)?;
        let score = kde.antitonic_score(config.eval_points)?;
        let loss = ConvexLoss::from_score(score.to_pl());
        let fit = match m_estimate_from(data, &loss, &beta) {
            Ok(f) => f,
            Err(ShapeError::NonConvergence { best, .. }) => MEstimate {
                objective: f64::NAN,
                beta: best,
                variance_factor: f64::NAN,
                iterations: 0,
            },
            Err(e) => return Err(e),
        };
        let mut fit = fit;
        if !symmetric {
            recentre(data, &mut fit.beta);
        }
        let change = norm(&fit.beta.iter().zip(&beta).map(|(a, b)| a - b).collect::<Vec<_>>());
        let scale = 1.0 + norm(&beta);
        beta = fit.beta.clone();
        last = Some((fit, score, loss, kde));
        if change < config.tol * scale {
            break;
        }
    }
    let (mut estimate, score, loss, kde) = last.expect("at least one round ran");
    let r = data.residuals(&estimate.beta);
    let num = r.iter().map(|&v| loss.psi(v).powi(2)).sum::<f64>() / r.len() as f64;
    let den = pl_stieltjes(loss.score(), &|z| kde.pdf(z), &|z| kde.cdf(z));
    estimate.variance_factor = if den < 0.0 { num / (den * den) } else { f64::INFINITY };
    Ok(AlternatingFit { estimate, score, rounds, bandwidth: kde.h })
}

/// Shifts the intercept (first coefficient) so the residual median is zero.
fn recentre(data: &LinearModelData, beta: &mut [f64]) {
    let mut r = data.residuals(beta);
    r.sort_by(f64::total_cmp);
    let n = r.len();
    let med = if n % 2 == 1 { r[n / 2] } else { 0.5 * (r[n / 2 - 1] + r[n / 2]) };
    beta[0] += med;
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kde_is_normalized_and_symmetric() {
        let r: Vec<f64> = (0..40).map(|i| ((i * 37 % 40) as f64 - 13.0) * 0.1).collect();
        let k = Kde::new(&r, true).unwrap();
        let mass = crate::quad::adaptive(&|z| k.pdf(z), -20.0, 20.0, 1e-12, 1e-12);
        assert!((mass - 1.0).abs() < 1e-9);
        assert!((k.pdf(0.7) - k.pdf(-0.7)).abs() < 1e-15);
        assert!((k.cdf(0.0) - 0.5).abs() < 1e-12);
        let a = k.cdf(0.4) - k.cdf(-0.2);
        let b = crate::quad::adaptive(&|z| k.pdf(z), -0.2, 0.4, 1e-13, 1e-12);
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn equal_residuals_collapse_the_bandwidth() {
        assert!(matches!(Kde::new(&[1.0; 10], false), Err(ShapeError::Degenerate(_))));
        let data = LinearModelData::intercept_only(vec![2.0; 8]).unwrap();
        assert!(alternating_fit(&data, &AlternatingConfig::default()).is_err());
    }
}
