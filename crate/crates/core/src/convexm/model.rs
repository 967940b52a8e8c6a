use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use libm::erfc;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Result};
use crate::shape::{Density, GridDensity};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Mass left out at each end when a finite working support is needed.
pub const SUPPORT_TAIL: f64 = 1e-10;

/// One Gaussian component of a location mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Error density `f₀` with its distribution function, generalized inverse and
/// location score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DensityModel {
    Gaussian,
    Laplace,
    Cauchy,
    Logistic,
    Mixture { components: Vec<MixtureComponent> },
    Grid { density: GridDensity },
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

pub(crate) fn std_normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal quantile, polished by two Newton steps on an accurate cdf.
pub(crate) fn std_normal_quantile(u: f64) -> f64 {
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    let mut z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(u);
    for _ in 0..2 {
        // work on the smaller tail so the residual keeps relative precision
        let (err, dens) = if z > 0.0 {
            (0.5 * erfc(z / SQRT_2) - (1.0 - u), -std_normal_pdf(z))
        } else {
            (std_normal_cdf(z) - u, std_normal_pdf(z))
        };
        if dens == 0.0 {
            break;
        }
        z -= err / dens;
    }
    z
}

impl DensityModel {
    /// Gaussian location mixture; weights are normalized.
    pub fn mixture(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return invalid("mixture needs at least one component");
        }
        if components
            .iter()
            .any(|c| !(c.weight >= 0.0 && c.sd > 0.0 && c.mean.is_finite() && c.sd.is_finite()))
        {
            return invalid("mixture weights must be nonnegative and sds positive");
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if !(total > 0.0 && total.is_finite()) {
            return invalid("mixture weights must have positive finite sum");
        }
        let components = components
            .into_iter()
            .map(|c| MixtureComponent { weight: c.weight / total, ..c })
            .collect();
        Ok(Self::Mixture { components })
    }

    pub fn grid(density: GridDensity) -> Self {
        Self::Grid { density }
    }

    /// Parses the analytic family names used on the command line.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "gaussian" | "normal" => Ok(Self::Gaussian),
            "laplace" => Ok(Self::Laplace),
            "cauchy" => Ok(Self::Cauchy),
            "logistic" => Ok(Self::Logistic),
            other => invalid(format!("unknown error model '{other}'")),
        }
    }

    pub fn pdf(&self, z: f64) -> f64 {
        match self {
            Self::Gaussian => std_normal_pdf(z),
            Self::Laplace => 0.5 * (-z.abs()).exp(),
            Self::Cauchy => 1.0 / (PI * (1.0 + z * z)),
            Self::Logistic => {
                let e = (-z.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            Self::Mixture { components } => components
                .iter()
                .map(|c| c.weight * std_normal_pdf((z - c.mean) / c.sd) / c.sd)
                .sum(),
            Self::Grid { density } => density.pdf(z),
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match self {
            Self::Gaussian => std_normal_cdf(z),
            Self::Laplace => {
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            Self::Cauchy => {
                // atan(1/z) keeps precision in the tails
                if z < -1.0 {
                    -(1.0 / z).atan() / PI
                } else if z > 1.0 {
                    1.0 - (1.0 / z).atan() / PI
                } else {
                    0.5 + z.atan() / PI
                }
            }
            Self::Logistic => {
                if z < 0.0 {
                    let e = z.exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + (-z).exp())
                }
            }
            Self::Mixture { components } => components
                .iter()
                .map(|c| c.weight * std_normal_cdf((z - c.mean) / c.sd))
                .sum(),
            Self::Grid { density } => density.cdf(z),
        }
    }

    /// Generalized inverse `inf{z : F₀(z) ≥ u}`; infinite at 0 or 1 when the
    /// support is unbounded on that side.
    pub fn quantile(&self, u: f64) -> f64 {
        let (lo, hi) = self.support_bounds();
        if u <= 0.0 {
            return lo;
        }
        if u >= 1.0 {
            return hi;
        }
        match self {
            Self::Gaussian => std_normal_quantile(u),
            Self::Laplace => {
                if u < 0.5 {
                    (2.0 * u).ln()
                } else {
                    -(2.0 * (1.0 - u)).ln()
                }
            }
            Self::Cauchy => {
                if u < 0.25 {
                    -1.0 / (PI * u).tan()
                } else if u > 0.75 {
                    1.0 / (PI * (1.0 - u)).tan()
                } else {
                    (PI * (u - 0.5)).tan()
                }
            }
            Self::Logistic => (u / (1.0 - u)).ln(),
            Self::Mixture { components } => mixture_quantile(self, components, u),
            Self::Grid { density } => density.quantile(u).unwrap_or(f64::NAN),
        }
    }

    /// Location score `ψ₀ = f₀'/f₀`; `None` where it does not exist.
    pub fn score(&self, z: f64) -> Option<f64> {
        match self {
            Self::Gaussian => Some(-z),
            Self::Laplace => (z != 0.0).then(|| -z.signum()),
            Self::Cauchy => Some(-2.0 * z / (1.0 + z * z)),
            Self::Logistic => Some(-(0.5 * z).tanh()),
            Self::Mixture { components } => {
                let mut num = 0.0;
                let mut den = 0.0;
                // factor out the largest exponent so remote tails do not underflow
                let top = components
                    .iter()
                    .map(|c| -0.5 * ((z - c.mean) / c.sd).powi(2) - c.sd.ln() + c.weight.ln())
                    .fold(f64::NEG_INFINITY, f64::max);
                for c in components {
                    let t = (z - c.mean) / c.sd;
                    let w = (-0.5 * t * t - c.sd.ln() + c.weight.ln() - top).exp();
                    num += w * (-t / c.sd);
                    den += w;
                }
                Some(num / den)
            }
            Self::Grid { density } => {
                let g = density.grid();
                let d = density.density();
                if z < g[0] || z >= *g.last().unwrap() {
                    return None;
                }
                let h = density.step();
                let i = (((z - g[0]) / h) as usize).min(g.len() - 2);
                let v = density.pdf(z);
                (v > 0.0).then(|| (d[i + 1] - d[i]) / h / v)
            }
        }
    }

    /// Endpoints of the support `S₀` (possibly infinite).
    pub fn support_bounds(&self) -> (f64, f64) {
        match self {
            Self::Grid { density } => {
                let g = density.grid();
                let d = density.density();
                let first = d.iter().position(|&v| v > 0.0).unwrap_or(0);
                let last = d.iter().rposition(|&v| v > 0.0).unwrap_or(g.len() - 1);
                (g[first.saturating_sub(1)], g[(last + 1).min(g.len() - 1)])
            }
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Density at the ends of the support, as limits from inside.
    pub(crate) fn boundary_density(&self) -> (f64, f64) {
        match self {
            Self::Grid { density } => {
                let d = density.density();
                let first = d.iter().position(|&v| v > 0.0).unwrap_or(0);
                let last = d.iter().rposition(|&v| v > 0.0).unwrap_or(d.len() - 1);
                // a positive value at the outermost grid node is a jump to zero
                let lo = if first == 0 { d[0] } else { 0.0 };
                let hi = if last == d.len() - 1 { d[last] } else { 0.0 };
                (lo, hi)
            }
            _ => (0.0, 0.0),
        }
    }

    /// Points where `f₀` is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            Self::Laplace => vec![0.0],
            Self::Grid { density } => density.grid().to_vec(),
            _ => Vec::new(),
        }
    }
}

fn mixture_quantile(model: &DensityModel, components: &[MixtureComponent], u: f64) -> f64 {
    let mut lo = components
        .iter()
        .map(|c| c.mean - 40.0 * c.sd)
        .fold(f64::INFINITY, f64::min);
    let mut hi = components
        .iter()
        .map(|c| c.mean + 40.0 * c.sd)
        .fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if model.cdf(mid) >= u {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

impl Density for DensityModel {
    fn pdf(&self, x: f64) -> f64 {
        DensityModel::pdf(self, x)
    }

    fn cdf(&self, x: f64) -> f64 {
        DensityModel::cdf(self, x)
    }

    fn support(&self) -> (f64, f64) {
        match self {
            Self::Grid { density } => density.support(),
            _ => (self.quantile(SUPPORT_TAIL), self.quantile(1.0 - SUPPORT_TAIL)),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Grid { density } => Density::breakpoints(density),
            _ => self.kinks(),
        }
    }
}
