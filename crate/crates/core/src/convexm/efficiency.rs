use super::model::DensityModel;
use super::score::{antitonic_score, PlScore, ScoreFn};
use crate::error::{invalid, Result};
use crate::quad::adaptive;

/// Tail mass excluded at each end when integrating over `u = F₀(z)`.
pub const INFO_TAIL: f64 = 1e-9;

/// Tail mass left out when integrating a linear tail of a [`PlScore`].
const PL_TAIL: f64 = 1e-12;

const QUAD_ABS: f64 = 1e-13;
const QUAD_REL: f64 = 1e-12;

/// Fisher information for location `i(f₀) = ∫ψ₀² f₀`, integrated over
/// `F₀(z) ∈ [1e-9, 1 − 1e-9]`. Returns `+∞` when `f₀` is not absolutely
/// continuous on the real line.
pub fn fisher_info(model: &DensityModel) -> Result<f64> {
    let (lo, hi) = model.boundary_density();
    if lo > 0.0 || hi > 0.0 {
        return Ok(f64::INFINITY);
    }
    if let DensityModel::Grid { density } = model {
        // ψ₀ is a ratio of linear functions on each cell
        let g = density.grid();
        let d = density.density();
        let h = density.step();
        let mut total = 0.0;
        for i in 0..g.len() - 1 {
            let (a, b) = (d[i], d[i + 1]);
            if a == b {
                continue;
            }
            if a <= 0.0 || b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total += (b - a) / h * (b / a).ln();
        }
        return Ok(total);
    }
    let integrand = |u: f64| {
        let z = model.quantile(u);
        let s = model.score(z).unwrap_or(0.0);
        s * s
    };
    let a = adaptive(&integrand, INFO_TAIL, 0.5, QUAD_ABS, QUAD_REL);
    let b = adaptive(&integrand, 0.5, 1.0 - INFO_TAIL, QUAD_ABS, QUAD_REL);
    Ok(a + b)
}

/// Antitonic information `i*(f₀) = ∫(ψ₀*)² dP₀`.
pub fn istar(model: &DensityModel) -> Result<f64> {
    Ok(antitonic_score(model)?.information())
}

/// Antitonic relative efficiency `i*/i`; zero when `i` is infinite.
pub fn are_star(model: &DensityModel) -> Result<f64> {
    let psi = antitonic_score(model)?;
    are_star_with(model, &psi)
}

/// [`are_star`] reusing a precomputed projected score.
pub fn are_star_with(model: &DensityModel, psi: &ScoreFn) -> Result<f64> {
    let i = fisher_info(model)?;
    if i.is_infinite() {
        return Ok(0.0);
    }
    if !(i > 0.0) {
        return invalid("Fisher information is zero");
    }
    Ok(psi.information() / i)
}

/// Decreasing scores whose second moment and Stieltjes integral against a
/// density can be evaluated.
pub trait DecreasingScore {
    /// `∫ψ² dP₀`.
    fn second_moment(&self, model: &DensityModel) -> f64;

    /// `∫_{S₀} f₀ dψ`, nonpositive.
    fn stieltjes(&self, model: &DensityModel) -> f64;
}

impl DecreasingScore for ScoreFn {
    fn second_moment(&self, model: &DensityModel) -> f64 {
        let z = self.zknots();
        self.slopes()
            .iter()
            .enumerate()
            .map(|(k, s)| s * s * (cdf_ext(model, z[k + 1]) - cdf_ext(model, z[k])))
            .sum()
    }

    fn stieltjes(&self, model: &DensityModel) -> f64 {
        let z = self.zknots();
        let s = self.slopes();
        (1..s.len())
            .map(|k| pdf_ext(model, z[k]) * (s[k] - s[k - 1]))
            .sum()
    }
}

fn cdf_ext(model: &DensityModel, z: f64) -> f64 {
    if z == f64::NEG_INFINITY {
        0.0
    } else if z == f64::INFINITY {
        1.0
    } else {
        model.cdf(z)
    }
}

fn pdf_ext(model: &DensityModel, z: f64) -> f64 {
    if z.is_finite() {
        model.pdf(z)
    } else {
        0.0
    }
}

impl DecreasingScore for PlScore {
    fn second_moment(&self, model: &DensityModel) -> f64 {
        let z = self.nodes();
        let left = self.left_values();
        let right = self.right_values();
        let (ls, rs) = self.tail_slopes();
        let m = z.len();
        if (ls != 0.0 || rs != 0.0) && matches!(model, DensityModel::Cauchy) {
            // a linear tail is not square-integrable without a second moment
            return f64::INFINITY;
        }
        let kinks = model.kinks();
        let mut total = 0.0;
        // tails in u-space, where the quantile transform tames long ranges
        let u0 = model.cdf(z[0]);
        total += if ls == 0.0 {
            left[0] * left[0] * u0
        } else {
            let f = |u: f64| (left[0] + ls * (model.quantile(u) - z[0])).powi(2);
            adaptive(&f, PL_TAIL, u0, QUAD_ABS, QUAD_REL)
        };
        let um = model.cdf(z[m - 1]);
        total += if rs == 0.0 {
            right[m - 1] * right[m - 1] * (1.0 - um)
        } else {
            let f = |u: f64| (right[m - 1] + rs * (model.quantile(u) - z[m - 1])).powi(2);
            adaptive(&f, um, 1.0 - PL_TAIL, QUAD_ABS, QUAD_REL)
        };
        for i in 0..m - 1 {
            let slope = self.piece_slope(i);
            let f = |x: f64| {
                let v = right[i] + slope * (x - z[i]);
                v * v * model.pdf(x)
            };
            let mut cuts = vec![z[i]];
            cuts.extend(kinks.iter().copied().filter(|&k| k > z[i] && k < z[i + 1]));
            cuts.push(z[i + 1]);
            total += cuts
                .windows(2)
                .map(|w| adaptive(&f, w[0], w[1], QUAD_ABS, QUAD_REL))
                .sum::<f64>();
        }
        total
    }

    fn stieltjes(&self, model: &DensityModel) -> f64 {
        pl_stieltjes(self, &|z| model.pdf(z), &|z| model.cdf(z))
    }
}

/// `∫ f dψ` for a piecewise-linear score against a density given by its pdf
/// and cdf: jump terms plus slope times mass on each piece and tail.
pub(crate) fn pl_stieltjes(psi: &PlScore, pdf: &dyn Fn(f64) -> f64, cdf: &dyn Fn(f64) -> f64) -> f64 {
    let z = psi.nodes();
    let m = z.len();
    let (ls, rs) = psi.tail_slopes();
    let jumps: f64 = (0..m)
        .map(|i| pdf(z[i]) * (psi.right_values()[i] - psi.left_values()[i]))
        .sum();
    let pieces: f64 = (0..m - 1)
        .map(|i| psi.piece_slope(i) * (cdf(z[i + 1]) - cdf(z[i])))
        .sum();
    jumps + pieces + ls * cdf(z[0]) + rs * (1.0 - cdf(z[m - 1]))
}

/// Asymptotic variance factor `V(ψ) = ∫ψ² dP₀ / (∫ f₀ dψ)²`; `+∞` when the
/// denominator vanishes.
pub fn variance_factor<S: DecreasingScore + ?Sized>(psi: &S, model: &DensityModel) -> Result<f64> {
    let num = psi.second_moment(model);
    if !(num > 0.0) {
        return invalid("score has zero second moment");
    }
    let den = psi.stieltjes(model);
    if den == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(num / (den * den))
}

/// Score-matching objective `D(cψ) = c²∫ψ² dP₀ + 2c∫f₀ dψ`.
pub fn score_matching<S: DecreasingScore + ?Sized>(psi: &S, model: &DensityModel, c: f64) -> f64 {
    c * c * psi.second_moment(model) + 2.0 * c * psi.stieltjes(model)
}

/// `inf_{c ≥ 0} D(cψ)` in closed form, together with the minimizing `c`.
pub fn score_matching_min<S: DecreasingScore + ?Sized>(
    psi: &S,
    model: &DensityModel,
) -> Result<(f64, f64)> {
    let a = psi.second_moment(model);
    if !(a > 0.0) {
        return invalid("score has zero second moment");
    }
    let b = psi.stieltjes(model);
    if b >= 0.0 {
        return Ok((0.0, 0.0));
    }
    Ok((-b * b / a, -b / a))
}
