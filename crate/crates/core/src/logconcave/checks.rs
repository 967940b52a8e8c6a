use super::density::LogLinearDensity;
use crate::error::{invalid, Result};
use crate::quad::{integrate_panels, refine_panels};
use crate::shape::{Density, GridDensity, SortedSample, MIN_PANELS};

/// Slack allowed in second differences of a log-density.
pub const LOG_CONCAVE_GRID_TOL: f64 = 1e-8;

/// Number of grid points used by [`envelope_check`].
pub const ENVELOPE_GRID: usize = 2048;

/// Slack allowed above the envelope.
pub const ENVELOPE_SLACK: f64 = 1e-8;

/// Tolerance on the standardisation required by [`envelope_check`].
pub const STANDARDIZATION_TOL: f64 = 1e-6;

/// Whether a grid density has a concave logarithm on its positive part.
///
/// Zeros are allowed only in leading and trailing runs; a zero between
/// positive values is rejected.
pub fn is_log_concave(f: &GridDensity) -> Result<bool> {
    let d = f.density();
    let Some(first) = d.iter().position(|&v| v > 0.0) else {
        return invalid("density vanishes on the whole grid");
    };
    let last = d.iter().rposition(|&v| v > 0.0).unwrap();
    if d[first..=last].iter().any(|&v| v <= 0.0) {
        return invalid("density has zeros inside its support");
    }
    let logs: Vec<f64> = d[first..=last].iter().map(|v| v.ln()).collect();
    Ok(logs
        .windows(3)
        .all(|w| w[0] - 2.0 * w[1] + w[2] <= LOG_CONCAVE_GRID_TOL))
}

/// Pointwise upper bound for standardised univariate log-concave densities.
pub fn envelope_bound(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        1.0 / (2.0 - x * x).sqrt()
    } else {
        (1.0 - x.abs()).exp()
    }
}

/// Checks a density with mean 0 and variance 1 against [`envelope_bound`] on
/// an evenly spaced grid over its support.
pub fn envelope_check<D: Density + ?Sized>(f: &D) -> Result<bool> {
    let (lo, hi) = f.support();
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return invalid("density needs a finite, non-empty support");
    }
    let panels = refine_panels(lo, hi, &f.breakpoints(), MIN_PANELS);
    let mass = integrate_panels(&|x| f.pdf(x), &panels);
    let mean = integrate_panels(&|x| x * f.pdf(x), &panels) / mass;
    let var = integrate_panels(&|x| (x - mean) * (x - mean) * f.pdf(x), &panels) / mass;
    if mean.abs() >= STANDARDIZATION_TOL || (var - 1.0).abs() >= STANDARDIZATION_TOL {
        return invalid(format!(
            "density is not standardised (mean {mean}, variance {var})"
        ));
    }
    let h = (hi - lo) / (ENVELOPE_GRID - 1) as f64;
    Ok((0..ENVELOPE_GRID).all(|i| {
        let x = if i + 1 == ENVELOPE_GRID { hi } else { lo + h * i as f64 };
        f.pdf(x) <= envelope_bound(x) + ENVELOPE_SLACK
    }))
}

/// `(1/n) Σ w_i log(f̂(x_i)/f₀(x_i))`; `+∞` if `f₀` vanishes at an observation.
pub fn empirical_kl<D: Density + ?Sized>(
    fhat: &LogLinearDensity,
    f0: &D,
    sample: &SortedSample,
) -> f64 {
    let mut total = 0.0;
    for (&x, p) in sample.values().iter().zip(sample.probabilities()) {
        let q = f0.pdf(x);
        if !(q > 0.0) {
            return f64::INFINITY;
        }
        total += p * (fhat.log_pdf(x) - q.ln());
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal_mixture(sep: f64) -> GridDensity {
        let phi = |x: f64| (-0.5 * x * x).exp();
        GridDensity::from_fn(-10.0, 12.0, 2201, |x| 0.5 * phi(x) + 0.5 * phi(x - sep)).unwrap()
    }

    #[test]
    fn mixture_boundary() {
        assert!(is_log_concave(&normal_mixture(1.9)).unwrap());
        assert!(!is_log_concave(&normal_mixture(2.1)).unwrap());
        assert!(is_log_concave(&normal_mixture(0.0)).unwrap());
    }

    #[test]
    fn interior_zero_is_rejected() {
        let g = GridDensity::from_fn(0.0, 3.0, 4, |x| if x == 1.0 { 0.0 } else { 1.0 }).unwrap();
        assert!(is_log_concave(&g).is_err());
    }

    #[test]
    fn envelope_examples() {
        let phi = GridDensity::from_fn(-12.0, 12.0, 1 << 15, |x| (-0.5 * x * x).exp()).unwrap();
        // grid variance of the interpolant is off by h²/12, still well inside
        // the standardisation tolerance at this resolution
        assert!(envelope_check(&phi).unwrap());
        let shifted = GridDensity::from_fn(-11.0, 13.0, 1 << 12, |x| (-0.5 * x * x).exp()).unwrap();
        let moved = GridDensity::new(
            shifted.grid().iter().map(|x| x + 0.5).collect(),
            shifted.density().to_vec(),
        )
        .unwrap();
        assert!(envelope_check(&moved).is_err());
    }

    #[test]
    fn empirical_kl_of_identical_uniforms() {
        let u = LogLinearDensity::new(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let s = SortedSample::new(&[0.2, 0.4, 0.9]).unwrap();
        assert_eq!(empirical_kl(&u, &u, &s), 0.0);
        let narrow = LogLinearDensity::new(vec![0.0, 0.5], vec![2f64.ln(), 2f64.ln()]).unwrap();
        assert_eq!(empirical_kl(&u, &narrow, &s), f64::INFINITY);
    }
}
