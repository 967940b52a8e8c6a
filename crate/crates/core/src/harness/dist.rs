use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Serialize, Serializer};

use super::rng::open_unit;
use crate::convexm::{DensityModel, MixtureComponent};
use crate::error::{invalid, Result, ShapeError};
use crate::shape::Density;

/// Sampling distributions of the Monte Carlo harness.
///
/// The textual form is `name` or `name:p1,p2,...`; mixture components are
/// separated by `;` as in `gaussian-mixture:0.5,-2,1;0.5,2,1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Exp { rate: f64 },
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, sd: f64 },
    Laplace { loc: f64, scale: f64 },
    Cauchy { loc: f64, scale: f64 },
    GaussianMixture { components: Vec<MixtureComponent> },
    /// Density proportional to `min(h, 1/x)` on `(0, l]`; needs `h·l ≥ 1`.
    TruncatedDecreasing { h: f64, l: f64 },
    /// Exponential with rate `rate` conditioned on `(0, upper]`.
    TruncatedExp { rate: f64, upper: f64 },
    Triangular { lo: f64, mode: f64, hi: f64 },
}

fn params(body: Option<&str>, defaults: &[f64]) -> Result<Vec<f64>> {
    let Some(body) = body else {
        return Ok(defaults.to_vec());
    };
    let vals = body
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| ShapeError::InvalidArgument(format!("bad distribution parameter: {e}")))?;
    if vals.len() != defaults.len() {
        return invalid(format!("expected {} parameters, got {}", defaults.len(), vals.len()));
    }
    Ok(vals)
}

impl Distribution {
    /// Checks the parameters.
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let ok = match self {
            Self::Exp { rate } => pos(*rate),
            Self::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Self::Gaussian { mean: c, sd: s }
            | Self::Laplace { loc: c, scale: s }
            | Self::Cauchy { loc: c, scale: s } => c.is_finite() && pos(*s),
            Self::GaussianMixture { components } => {
                !components.is_empty()
                    && components
                        .iter()
                        .all(|c| c.weight >= 0.0 && c.mean.is_finite() && pos(c.sd))
                    && pos(components.iter().map(|c| c.weight).sum())
            }
            Self::TruncatedDecreasing { h, l } => pos(*h) && pos(*l) && h * l >= 1.0,
            Self::TruncatedExp { rate, upper } => pos(*rate) && pos(*upper),
            Self::Triangular { lo, mode, hi } => {
                lo.is_finite() && hi.is_finite() && lo <= mode && mode <= hi && lo < hi
            }
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("invalid parameters for distribution {self}"))
        }
    }

    /// `n` independent draws.
    pub fn sample<R: RngCore + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.validate()?;
        let mut out = Vec::with_capacity(n);
        let mut spare = None;
        let mut normal = |rng: &mut R| -> f64 {
            if let Some(z) = spare.take() {
                return z;
            }
            // Marsaglia polar method
            loop {
                let a = 2.0 * open_unit(rng) - 1.0;
                let b = 2.0 * open_unit(rng) - 1.0;
                let s = a * a + b * b;
                if s < 1.0 && s > 0.0 {
                    let f = (-2.0 * s.ln() / s).sqrt();
                    spare = Some(b * f);
                    return a * f;
                }
            }
        };
        for _ in 0..n {
            let x = match self {
                Self::Gaussian { mean, sd } => mean + sd * normal(rng),
                Self::GaussianMixture { components } => {
                    let total: f64 = components.iter().map(|c| c.weight).sum();
                    let mut u = open_unit(rng) * total;
                    let mut pick = components.len() - 1;
                    for (k, c) in components.iter().enumerate() {
                        if u < c.weight {
                            pick = k;
                            break;
                        }
                        u -= c.weight;
                    }
                    let c = components[pick];
                    c.mean + c.sd * normal(rng)
                }
                _ => self.quantile(open_unit(rng)),
            };
            out.push(x);
        }
        Ok(out)
    }

    fn normalizer(h: f64, l: f64) -> f64 {
        1.0 + (h * l).ln()
    }

    /// Quantile function; exact for all families except the Gaussian ones,
    /// which are only sampled by the polar method.
    fn quantile(&self, u: f64) -> f64 {
        match *self {
            Self::Exp { rate } => -(-u).ln_1p() / rate,
            Self::Uniform { lo, hi } => lo + (hi - lo) * u,
            Self::Laplace { loc, scale } => {
                if u < 0.5 {
                    loc + scale * (2.0 * u).ln()
                } else {
                    loc - scale * (2.0 * (1.0 - u)).ln()
                }
            }
            Self::Cauchy { loc, scale } => loc + scale * (PI * (u - 0.5)).tan(),
            Self::TruncatedDecreasing { h, l } => {
                let t = u * Self::normalizer(h, l);
                if t <= 1.0 {
                    t / h
                } else {
                    (t - 1.0).exp() / h
                }
                .min(l)
            }
            Self::TruncatedExp { rate, upper } => {
                (-(-u * -(-rate * upper).exp_m1()).ln_1p() / rate).min(upper)
            }
            Self::Triangular { lo, mode, hi } => {
                let c = (mode - lo) / (hi - lo);
                if u < c {
                    lo + ((hi - lo) * (mode - lo) * u).sqrt()
                } else {
                    hi - ((hi - lo) * (hi - mode) * (1.0 - u)).sqrt()
                }
            }
            Self::Gaussian { .. } | Self::GaussianMixture { .. } => {
                unreachable!("Gaussian families are sampled by the polar method")
            }
        }
    }

    /// `(H, L)` of the class of decreasing densities on `(0, L]` bounded by
    /// `H` that contains this distribution, if any.
    pub fn decreasing_class(&self) -> Option<(f64, f64)> {
        match *self {
            Self::TruncatedDecreasing { h, l } => Some((h, l)),
            Self::TruncatedExp { rate, upper } => Some((rate / -(-rate * upper).exp_m1(), upper)),
            Self::Uniform { lo, hi } if lo == 0.0 => Some((1.0 / hi, hi)),
            _ => None,
        }
    }

    /// Standardized error model and scale, for families known to the
    /// M-estimation module.
    pub fn error_model(&self) -> Option<(DensityModel, f64)> {
        match self {
            Self::Gaussian { sd, .. } => Some((DensityModel::Gaussian, *sd)),
            Self::Laplace { scale, .. } => Some((DensityModel::Laplace, *scale)),
            Self::Cauchy { scale, .. } => Some((DensityModel::Cauchy, *scale)),
            Self::GaussianMixture { components } => {
                DensityModel::mixture(components.clone()).ok().map(|m| (m, 1.0))
            }
            _ => None,
        }
    }
}

impl Density for Distribution {
    fn pdf(&self, x: f64) -> f64 {
        match self {
            Self::Exp { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            Self::Uniform { lo, hi } => {
                if x < *lo || x > *hi {
                    0.0
                } else {
                    1.0 / (hi - lo)
                }
            }
            Self::Gaussian { mean, sd } => normal_pdf((x - mean) / sd) / sd,
            Self::Laplace { loc, scale } => 0.5 * (-(x - loc).abs() / scale).exp() / scale,
            Self::Cauchy { loc, scale } => {
                let z = (x - loc) / scale;
                1.0 / (PI * scale * (1.0 + z * z))
            }
            Self::GaussianMixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                components
                    .iter()
                    .map(|c| c.weight * normal_pdf((x - c.mean) / c.sd) / c.sd)
                    .sum::<f64>()
                    / total
            }
            Self::TruncatedDecreasing { h, l } => {
                if x <= 0.0 || x > *l {
                    0.0
                } else {
                    h.min(1.0 / x) / Self::normalizer(*h, *l)
                }
            }
            Self::TruncatedExp { rate, upper } => {
                if x < 0.0 || x > *upper {
                    0.0
                } else {
                    rate * (-rate * x).exp() / -(-rate * upper).exp_m1()
                }
            }
            Self::Triangular { lo, mode, hi } => {
                if x < *lo || x > *hi {
                    0.0
                } else if x < *mode {
                    2.0 * (x - lo) / ((hi - lo) * (mode - lo))
                } else if x > *mode {
                    2.0 * (hi - x) / ((hi - lo) * (hi - mode))
                } else {
                    2.0 / (hi - lo)
                }
            }
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Exp { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Self::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::Gaussian { mean, sd } => normal_cdf((x - mean) / sd),
            Self::Laplace { loc, scale } => {
                let z = (x - loc) / scale;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            Self::Cauchy { loc, scale } => 0.5 + ((x - loc) / scale).atan() / PI,
            Self::GaussianMixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                components
                    .iter()
                    .map(|c| c.weight * normal_cdf((x - c.mean) / c.sd))
                    .sum::<f64>()
                    / total
            }
            Self::TruncatedDecreasing { h, l } => {
                let z = Self::normalizer(*h, *l);
                if x <= 0.0 {
                    0.0
                } else if x >= *l {
                    1.0
                } else if x * h <= 1.0 {
                    h * x / z
                } else {
                    (1.0 + (h * x).ln()) / z
                }
            }
            Self::TruncatedExp { rate, upper } => {
                if x <= 0.0 {
                    0.0
                } else if x >= *upper {
                    1.0
                } else {
                    (-rate * x).exp_m1() / (-rate * upper).exp_m1()
                }
            }
            Self::Triangular { lo, mode, hi } => {
                if x <= *lo {
                    0.0
                } else if x >= *hi {
                    1.0
                } else if x <= *mode {
                    (x - lo).powi(2) / ((hi - lo) * (mode - lo))
                } else {
                    1.0 - (hi - x).powi(2) / ((hi - lo) * (hi - mode))
                }
            }
        }
    }

    fn support(&self) -> (f64, f64) {
        match self {
            Self::Exp { rate } => (0.0, 40.0 / rate),
            Self::Uniform { lo, hi } | Self::Triangular { lo, hi, .. } => (*lo, *hi),
            Self::Gaussian { mean, sd } => (mean - 12.0 * sd, mean + 12.0 * sd),
            Self::Laplace { loc, scale } => (loc - 40.0 * scale, loc + 40.0 * scale),
            Self::Cauchy { .. } => (self.quantile(1e-9), self.quantile(1.0 - 1e-9)),
            Self::GaussianMixture { components } => components.iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(a, b), c| (a.min(c.mean - 12.0 * c.sd), b.max(c.mean + 12.0 * c.sd)),
            ),
            Self::TruncatedDecreasing { l, .. } => (0.0, *l),
            Self::TruncatedExp { upper, .. } => (0.0, *upper),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Exp { .. } => vec![0.0],
            Self::Uniform { lo, hi } => vec![*lo, *hi],
            Self::Laplace { loc, .. } => vec![*loc],
            Self::TruncatedDecreasing { h, l } => vec![0.0, 1.0 / h, *l],
            Self::TruncatedExp { upper, .. } => vec![0.0, *upper],
            Self::Triangular { lo, mode, hi } => vec![*lo, *mode, *hi],
            _ => Vec::new(),
        }
    }
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

impl FromStr for Distribution {
    type Err = ShapeError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, body) = match s.split_once(':') {
            Some((n, b)) => (n.trim(), Some(b)),
            None => (s.trim(), None),
        };
        let d = match name {
            "exp" => Self::Exp { rate: params(body, &[1.0])?[0] },
            "uniform" => {
                let p = params(body, &[0.0, 1.0])?;
                Self::Uniform { lo: p[0], hi: p[1] }
            }
            "gaussian" | "normal" => {
                let p = params(body, &[0.0, 1.0])?;
                Self::Gaussian { mean: p[0], sd: p[1] }
            }
            "laplace" => {
                let p = params(body, &[0.0, 1.0])?;
                Self::Laplace { loc: p[0], scale: p[1] }
            }
            "cauchy" => {
                let p = params(body, &[0.0, 1.0])?;
                Self::Cauchy { loc: p[0], scale: p[1] }
            }
            "gaussian-mixture" => {
                let Some(body) = body else {
                    return invalid("gaussian-mixture needs components w,mean,sd;...");
                };
                let components = body
                    .split(';')
                    .map(|c| {
                        params(Some(c), &[0.0; 3]).map(|p| MixtureComponent {
                            weight: p[0],
                            mean: p[1],
                            sd: p[2],
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::GaussianMixture { components }
            }
            "truncated-decreasing" => {
                let p = params(body, &[4.0, 1.0])?;
                Self::TruncatedDecreasing { h: p[0], l: p[1] }
            }
            "truncated-exp" => {
                let p = params(body, &[1.0, 5.0])?;
                Self::TruncatedExp { rate: p[0], upper: p[1] }
            }
            "triangular" => {
                let p = params(body, &[0.0, 0.5, 1.0])?;
                Self::Triangular { lo: p[0], mode: p[1], hi: p[2] }
            }
            other => return invalid(format!("unknown distribution '{other}'")),
        };
        d.validate()?;
        Ok(d)
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exp { rate } => write!(f, "exp:{rate}"),
            Self::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            Self::Gaussian { mean, sd } => write!(f, "gaussian:{mean},{sd}"),
            Self::Laplace { loc, scale } => write!(f, "laplace:{loc},{scale}"),
            Self::Cauchy { loc, scale } => write!(f, "cauchy:{loc},{scale}"),
            Self::GaussianMixture { components } => {
                write!(f, "gaussian-mixture:")?;
                for (k, c) in components.iter().enumerate() {
                    if k > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{},{},{}", c.weight, c.mean, c.sd)?;
                }
                Ok(())
            }
            Self::TruncatedDecreasing { h, l } => write!(f, "truncated-decreasing:{h},{l}"),
            Self::TruncatedExp { rate, upper } => write!(f, "truncated-exp:{rate},{upper}"),
            Self::Triangular { lo, mode, hi } => write!(f, "triangular:{lo},{mode},{hi}"),
        }
    }
}

impl Serialize for Distribution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
