use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::dist::Distribution;
use super::rng::{open_unit, replicate_stream, stream_rng};
use super::table::{LogLogSlope, RiskRow, RiskTable};
use crate::convexm::{
    alternating_fit, are_star, fisher_info, istar, ols, AlternatingConfig, DensityModel,
    LinearModelData, MixtureComponent, Symmetry, SCORE_GRID,
};
use crate::error::{invalid, Result, ShapeError};
use crate::grenander::grenander_fit;
use crate::logconcave::{empirical_kl, logconcave_mle, LogLinearDensity};
use crate::shape::{
    cumulative_diagram, hellinger_sq, kolmogorov, least_concave_majorant, tv, wasserstein1,
    Density, PiecewiseLinearFn, SortedSample,
};

/// Monte Carlo studies the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    GrenanderRisk,
    LcmleRate,
    UniformAdaptation,
    Marshall,
    AreTable,
    MestVariance,
    HolderCounterexample,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        Self::GrenanderRisk,
        Self::LcmleRate,
        Self::UniformAdaptation,
        Self::Marshall,
        Self::AreTable,
        Self::MestVariance,
        Self::HolderCounterexample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::GrenanderRisk => "grenander-risk",
            Self::LcmleRate => "lcmle-rate",
            Self::UniformAdaptation => "uniform-adaptation",
            Self::Marshall => "marshall",
            Self::AreTable => "are-table",
            Self::MestVariance => "mest-variance",
            Self::HolderCounterexample => "holder-counterexample",
        }
    }

    fn min_n(self) -> usize {
        match self {
            Self::GrenanderRisk | Self::AreTable => 1,
            Self::MestVariance => 20,
            _ => 2,
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = ShapeError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| ShapeError::InvalidArgument(format!("unknown experiment id '{s}'")))
    }
}

/// What to run; echoed verbatim into the JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub id: ExperimentId,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    /// Sampling (or error) distribution; `are-table` uses it as the single
    /// model when set.
    pub dist: Distribution,
}

impl ExperimentConfig {
    /// Defaults of each study.
    pub fn new(id: ExperimentId) -> Self {
        let d = |s: &str| s.parse::<Distribution>().expect("valid default distribution");
        let (n_grid, replicates, dist) = match id {
            ExperimentId::GrenanderRisk => (vec![100, 400, 1600], 400, d("truncated-decreasing:4,1")),
            ExperimentId::LcmleRate => (vec![250, 1000, 4000], 200, d("gaussian")),
            ExperimentId::UniformAdaptation => (vec![100, 400, 1600], 400, d("uniform")),
            ExperimentId::Marshall => (vec![5, 20, 100, 500], 250, d("exp")),
            ExperimentId::AreTable => (vec![SCORE_GRID], 1, d("cauchy")),
            ExperimentId::MestVariance => (vec![2000], 300, d("cauchy")),
            ExperimentId::HolderCounterexample => (vec![4, 9, 16, 25], 1, d("uniform")),
        };
        Self { id, n_grid, replicates, seed: 1, dist }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return invalid("n-grid must not be empty");
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("n-grid must be strictly increasing");
        }
        if self.n_grid[0] < self.id.min_n() {
            return invalid(format!("{} needs n ≥ {}", self.id, self.id.min_n()));
        }
        if self.replicates == 0 {
            return invalid("replicates must be at least 1");
        }
        self.dist.validate()?;
        match self.id {
            ExperimentId::GrenanderRisk if !(self.dist.support().0 >= 0.0) => {
                invalid("grenander-risk needs a distribution on (0, ∞)")
            }
            ExperimentId::UniformAdaptation if !matches!(self.dist, Distribution::Uniform { .. }) => {
                invalid("uniform-adaptation needs a uniform distribution")
            }
            ExperimentId::MestVariance if self.dist.error_model().is_none() => {
                invalid("mest-variance needs a gaussian, laplace, cauchy or mixture error law")
            }
            _ => Ok(()),
        }
    }
}

/// How a check compares its value with the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Relation {
    /// `value − slack ≤ reference`.
    AtMost { slack: f64 },
    /// `|value − reference| ≤ tol`.
    Within { tol: f64 },
}

/// A theoretical guarantee evaluated on the experiment's output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub n: Option<usize>,
    pub value: f64,
    pub reference: f64,
    pub relation: Relation,
    pub holds: bool,
}

impl Check {
    fn new(name: &str, n: Option<usize>, value: f64, reference: f64, relation: Relation) -> Self {
        let holds = match relation {
            Relation::AtMost { slack } => value - slack <= reference,
            Relation::Within { tol } => (value - reference).abs() <= tol,
        };
        Self { name: name.to_string(), n, value, reference, relation, holds }
    }
}

/// Slope of one metric's mean risk in `n`, on log scales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSlope {
    pub metric: String,
    #[serde(flatten)]
    pub fit: LogLogSlope,
}

/// Output of [`run_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub table: RiskTable,
    pub slopes: Vec<MetricSlope>,
    pub checks: Vec<Check>,
}

impl ExperimentReport {
    pub fn all_checks_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn slope(&self, metric: &str) -> Option<LogLogSlope> {
        self.slopes.iter().find(|s| s.metric == metric).map(|s| s.fit)
    }
}

/// Runs replicate `rep` of cell `cell` for every replicate, in parallel, and
/// returns the results in replicate order.
fn replicates<T: Send>(
    config: &ExperimentConfig,
    cell: usize,
    f: impl Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..config.replicates)
        .into_par_iter()
        .map(|rep| f(&mut stream_rng(config.seed, replicate_stream(cell, rep))))
        .collect()
}

/// Runs a study; the result depends only on the configuration.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut table = RiskTable::new();
    let mut checks = Vec::new();
    match config.id {
        ExperimentId::GrenanderRisk => grenander_risk(config, &mut table, &mut checks)?,
        ExperimentId::LcmleRate => lcmle_rate(config, &mut table)?,
        ExperimentId::UniformAdaptation => uniform_adaptation(config, &mut table, &mut checks)?,
        ExperimentId::Marshall => marshall(config, &mut table, &mut checks)?,
        ExperimentId::AreTable => are_table(config, &mut table, &mut checks)?,
        ExperimentId::MestVariance => mest_variance(config, &mut table, &mut checks)?,
        ExperimentId::HolderCounterexample => holder(config, &mut table, &mut checks)?,
    }
    let slopes = table
        .metrics()
        .into_iter()
        .filter_map(|m| table.slope(&m).map(|fit| MetricSlope { metric: m, fit }))
        .collect();
    Ok(ExperimentReport { config: config.clone(), table, slopes, checks })
}

fn grenander_risk(config: &ExperimentConfig, table: &mut RiskTable, checks: &mut Vec<Check>) -> Result<()> {
    let bound = config.dist.decreasing_class().map(|(h, l)| 0.975 * (1.0 + h * l).ln().cbrt());
    for (cell, &n) in config.n_grid.iter().enumerate() {
        let vals = replicates(config, cell, |rng| {
            let x = SortedSample::new(&config.dist.sample(n, rng)?)?;
            tv(&grenander_fit(&x)?, &config.dist)
        })?;
        let scale = (n as f64).cbrt();
        let row = RiskRow::from_values(n, "tv", &vals, scale);
        if let Some(b) = bound {
            let slack = 3.0 * scale * row.std_error;
            checks.push(Check::new("scaled-tv-bound", Some(n), row.scaled, b, Relation::AtMost { slack }));
        }
        table.push(row);
    }
    Ok(())
}

fn lcmle_rate(config: &ExperimentConfig, table: &mut RiskTable) -> Result<()> {
    for (cell, &n) in config.n_grid.iter().enumerate() {
        let vals = replicates(config, cell, |rng| {
            let x = SortedSample::new(&config.dist.sample(n, rng)?)?;
            let f = logconcave_mle(&x)?;
            Ok((hellinger_sq(&f, &config.dist)?, empirical_kl(&f, &config.dist, &x)))
        })?;
        let (h, k): (Vec<f64>, Vec<f64>) = vals.into_iter().unzip();
        table.push(RiskRow::from_values(n, "hellinger-sq", &h, (n as f64).powf(0.8)));
        table.push(RiskRow::from_values(n, "empirical-kl", &k, n as f64));
    }
    Ok(())
}

fn uniform_adaptation(config: &ExperimentConfig, table: &mut RiskTable, checks: &mut Vec<Check>) -> Result<()> {
    for (cell, &n) in config.n_grid.iter().enumerate() {
        let vals = replicates(config, cell, |rng| {
            let x = SortedSample::new(&config.dist.sample(n, rng)?)?;
            tv(&logconcave_mle(&x)?, &config.dist)
        })?;
        let row = RiskRow::from_values(n, "tv", &vals, (n as f64).sqrt());
        let bound = 4.0 / (n as f64).sqrt();
        checks.push(Check::new("tv-bound", Some(n), row.mean, bound, Relation::AtMost { slack: 0.0 }));
        table.push(row);
    }
    Ok(())
}

fn uniform_in(rng: &mut dyn RngCore, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * open_unit(rng)
}

/// Random distribution on `(0, ∞)` with a concave distribution function.
fn random_decreasing(rng: &mut dyn RngCore) -> Distribution {
    match rng.next_u32() % 4 {
        0 => Distribution::Exp { rate: uniform_in(rng, 0.2, 5.0) },
        1 => Distribution::Uniform { lo: 0.0, hi: uniform_in(rng, 0.5, 3.0) },
        2 => {
            let l = uniform_in(rng, 0.5, 3.0);
            Distribution::TruncatedDecreasing { h: uniform_in(rng, 1.0, 10.0) / l, l }
        }
        _ => Distribution::TruncatedExp { rate: uniform_in(rng, 0.2, 5.0), upper: uniform_in(rng, 0.5, 4.0) },
    }
}

/// Random distribution whose density is concave on its support.
fn random_concave(rng: &mut dyn RngCore) -> Distribution {
    let lo = uniform_in(rng, -2.0, 1.0);
    let hi = lo + uniform_in(rng, 0.5, 4.0);
    if rng.next_u32() % 2 == 0 {
        Distribution::Uniform { lo, hi }
    } else {
        Distribution::Triangular { lo, mode: uniform_in(rng, lo, hi), hi }
    }
}

/// Random sampling law on the real line, possibly far from the truth.
fn random_data_law(rng: &mut dyn RngCore) -> Distribution {
    match rng.next_u32() % 5 {
        0 => random_concave(rng),
        1 => Distribution::Gaussian { mean: uniform_in(rng, -1.0, 1.0), sd: uniform_in(rng, 0.2, 2.0) },
        2 => Distribution::Laplace { loc: uniform_in(rng, -1.0, 1.0), scale: uniform_in(rng, 0.2, 2.0) },
        3 => Distribution::GaussianMixture {
            components: vec![
                MixtureComponent { weight: 0.5, mean: -1.5, sd: 0.5 },
                MixtureComponent { weight: 0.5, mean: uniform_in(rng, 0.0, 2.0), sd: 0.5 },
            ],
        },
        _ => Distribution::Exp { rate: uniform_in(rng, 0.3, 3.0) },
    }
}

/// `sup |M − F₀|` for a piecewise-linear `M` and a concave `F₀` on `(0, ∞)`.
///
/// On each linear piece `M − F₀` is convex, so its maximum sits at a knot,
/// where `M` is evaluated without interpolation; `F₀ − M` is concave there
/// and is maximized by ternary search.
fn majorant_deviation(maj: &PiecewiseLinearFn, f0: &Distribution) -> f64 {
    let (k, v) = (maj.knots(), maj.vals());
    let mut best = 0.0f64;
    for (&x, &m) in k.iter().zip(v) {
        best = best.max((m - f0.cdf(x)).abs());
    }
    for j in 0..k.len() - 1 {
        let slope = (v[j + 1] - v[j]) / (k[j + 1] - k[j]);
        let gap = |x: f64| f0.cdf(x) - (v[j] + slope * (x - k[j]));
        let (mut a, mut b) = (k[j], k[j + 1]);
        for _ in 0..100 {
            let (c, d) = (a + (b - a) / 3.0, b - (b - a) / 3.0);
            if gap(c) < gap(d) {
                a = c;
            } else {
                b = d;
            }
        }
        best = best.max(gap(0.5 * (a + b)));
    }
    best
}

fn marshall(config: &ExperimentConfig, table: &mut RiskTable, checks: &mut Vec<Check>) -> Result<()> {
    let (mut bad_lcm, mut bad_lc, mut total) = (0usize, 0usize, 0usize);
    for (cell, &n) in config.n_grid.iter().enumerate() {
        let vals = replicates(config, cell, |rng| {
            // least concave majorant against a concave truth
            let truth = random_decreasing(rng);
            let law = if rng.next_u32() % 2 == 0 { truth.clone() } else { random_decreasing(rng) };
            let x = SortedSample::new(&law.sample(n, rng)?)?;
            let lhs = majorant_deviation(&least_concave_majorant(&cumulative_diagram(&x, Some(0.0)))?, &truth);
            let rhs = kolmogorov(&x.ecdf(), &truth)?;
            // log-concave MLE against a concave density
            let truth = random_concave(rng);
            let law = if rng.next_u32() % 2 == 0 { truth.clone() } else { random_data_law(rng) };
            let y = SortedSample::new(&law.sample(n, rng)?)?;
            let lc_lhs = kolmogorov(&logconcave_mle(&y)?, &truth)?;
            let lc_rhs = 2.0 * kolmogorov(&y.ecdf(), &truth)?;
            Ok((lhs, rhs, lc_lhs, lc_rhs))
        })?;
        let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
        let r1: Vec<f64> = vals.iter().map(|v| ratio(v.0, v.1)).collect();
        let r2: Vec<f64> = vals.iter().map(|v| ratio(v.2, v.3)).collect();
        bad_lcm += vals.iter().filter(|v| !(v.0 <= v.1)).count();
        bad_lc += vals.iter().filter(|v| !(v.2 <= v.3)).count();
        total += vals.len();
        table.push(RiskRow::from_values(n, "lcm-ratio", &r1, 1.0));
        table.push(RiskRow::from_values(n, "logconcave-ratio", &r2, 1.0));
    }
    let exact = Relation::AtMost { slack: 0.0 };
    checks.push(Check::new("lcm-violations", Some(total), bad_lcm as f64, 0.0, exact));
    checks.push(Check::new("logconcave-violations", Some(total), bad_lc as f64, 0.0, exact));
    Ok(())
}

fn are_table(config: &ExperimentConfig, table: &mut RiskTable, checks: &mut Vec<Check>) -> Result<()> {
    let mut models: Vec<(String, DensityModel, f64)> = Vec::new();
    if let Some((m, scale)) = config.dist.error_model() {
        models.push((config.dist.to_string(), m, scale));
    }
    for name in ["gaussian", "laplace", "logistic", "cauchy"] {
        if !models.iter().any(|(_, m, s)| *m == DensityModel::from_name(name).unwrap() && *s == 1.0) {
            models.push((name.to_string(), DensityModel::from_name(name)?, 1.0));
        }
    }
    let n = SCORE_GRID;
    for (label, model, scale) in &models {
        let s2 = scale * scale;
        let i = fisher_info(model)? / s2;
        let is = istar(model)? / s2;
        let are = are_star(model)?;
        table.push(RiskRow::exact(n, &format!("fisher-info/{label}"), i));
        table.push(RiskRow::exact(n, &format!("antitonic-info/{label}"), is));
        table.push(RiskRow::exact(n, &format!("are-star/{label}"), are));
        checks.push(Check::new(&format!("are-star-at-most-one/{label}"), None, are, 1.0, Relation::AtMost { slack: 1e-3 }));
    }
    Ok(())
}

/// Largest absolute eigenvalue of a symmetric matrix.
fn op_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Regression with an intercept and two standard Gaussian covariates, fitted
/// by the alternating estimator and by least squares.
fn mest_variance(config: &ExperimentConfig, table: &mut RiskTable, checks: &mut Vec<Check>) -> Result<()> {
    let beta0 = [1.0, 2.0, -1.0];
    let d = beta0.len();
    let (model, scale) = config.dist.error_model().expect("validated");
    let info = istar(&model)? / (scale * scale);
    let fit_config = AlternatingConfig { symmetry: Symmetry::Symmetric, ..Default::default() };
    let gauss = Distribution::Gaussian { mean: 0.0, sd: 1.0 };
    for (cell, &n) in config.n_grid.iter().enumerate() {
        let vals = replicates(config, cell, |rng| {
            let z1 = gauss.sample(n, rng)?;
            let z2 = gauss.sample(n, rng)?;
            let eps = config.dist.sample(n, rng)?;
            let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![z1[i], z2[i]]).collect();
            let y: Vec<f64> = (0..n).map(|i| beta0[0] + beta0[1] * z1[i] + beta0[2] * z2[i] + eps[i]).collect();
            let data = LinearModelData::new(&rows, y, true)?;
            let fit = alternating_fit(&data, &fit_config)?;
            let ls = ols(&data)?;
            let err: Vec<f64> = fit.estimate.beta.iter().zip(&beta0).map(|(b, t)| b - t).collect();
            let ls_sq: f64 = ls.beta.iter().zip(&beta0).map(|(b, t)| (b - t).powi(2)).sum();
            Ok((err, ls_sq))
        })?;
        let k = vals.len() as f64;
        let nf = n as f64;
        let sq: Vec<f64> = vals.iter().map(|v| v.0.iter().map(|e| e * e).sum()).collect();
        let ls_sq: Vec<f64> = vals.iter().map(|v| v.1).collect();
        let sq_row = RiskRow::from_values(n, "sq-error", &sq, nf);
        let ls_row = RiskRow::from_values(n, "ols-sq-error", &ls_sq, nf);
        let mean: Vec<f64> = (0..d).map(|j| vals.iter().map(|v| v.0[j]).sum::<f64>() / k).collect();
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for v in &vals {
            for a in 0..d {
                for b in 0..d {
                    cov[(a, b)] += nf * (v.0[a] - mean[a]) * (v.0[b] - mean[b]);
                }
            }
        }
        cov /= (k - 1.0).max(1.0);
        let target = DMatrix::<f64>::identity(d, d) / info;
        let rel = op_norm(&(&cov - &target)) / op_norm(&target);
        let ratio = sq_row.median / ls_row.median;
        for j in 0..d {
            table.push(RiskRow::exact(n, &format!("n-var/beta{j}"), cov[(j, j)]));
        }
        table.push(RiskRow::exact(n, "cov-rel-error", rel));
        table.push(RiskRow::exact(n, "median-sq-error-ratio", ratio));
        table.push(sq_row);
        table.push(ls_row);
        checks.push(Check::new("cov-rel-error", Some(n), rel, 0.2, Relation::AtMost { slack: 0.0 }));
        checks.push(Check::new("median-sq-error-ratio", Some(n), ratio, 0.01, Relation::AtMost { slack: 0.0 }));
    }
    Ok(())
}

/// Log-concave projection of `U[−a, a]`, which is the uniform itself.
fn uniform_projection(a: f64) -> Result<LogLinearDensity> {
    LogLinearDensity::normalized(vec![-a, a], vec![0.0, 0.0])
}

fn holder(config: &ExperimentConfig, table: &mut RiskTable, checks: &mut Vec<Check>) -> Result<()> {
    for &n in &config.n_grid {
        let nf = n as f64;
        let (a, b) = (1.0 / nf, 1.0 / (nf * nf));
        let p = Distribution::Uniform { lo: -a, hi: a };
        let q = Distribution::Uniform { lo: -b, hi: b };
        let h2 = hellinger_sq(&uniform_projection(a)?, &uniform_projection(b)?)?;
        let w = wasserstein1(&p, &q)?;
        table.push(RiskRow::exact(n, "hellinger-sq", h2));
        table.push(RiskRow::exact(n, "wasserstein1", w));
        let tol = Relation::Within { tol: 1e-10 };
        checks.push(Check::new("hellinger-sq", Some(n), h2, 2.0 - 2.0 / nf.sqrt(), tol));
        checks.push(Check::new("wasserstein1", Some(n), w, 0.5 / nf - 0.5 / (nf * nf), tol));
    }
    Ok(())
}
