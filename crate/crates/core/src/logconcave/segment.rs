//! Closed-form integrals of exponentiated linear functions over a segment.

use crate::error::{invalid, Result};

/// `∫ₐᵇ exp(ℓ)` for the linear `ℓ` with `ℓ(a) = fa`, `ℓ(b) = fb`.
pub fn exp_segment_integral(a: f64, b: f64, fa: f64, fb: f64) -> Result<f64> {
    if !(a < b) {
        return invalid("segment needs a < b");
    }
    if !fa.is_finite() || !fb.is_finite() {
        return invalid("segment end values must be finite");
    }
    let d = fb - fa;
    if d.abs() < 1e-12 {
        return Ok((b - a) * fa.exp());
    }
    Ok((b - a) * seg_moment(0, 0, fa, fb))
}

/// `∫₀¹ (1−s)^p s^q exp((1−s)·r + s·t) ds` for `p + q ≤ 2`.
pub(crate) fn seg_moment(p: u32, q: u32, r: f64, t: f64) -> f64 {
    // factor out the larger endpoint so the remaining exponent is ≤ 0
    if t >= r {
        t.exp() * beta_exp(p, q, r - t)
    } else {
        r.exp() * beta_exp(q, p, t - r)
    }
}

/// `∫₀¹ u^a (1−u)^b e^{x u} du` for `x ≤ 0` and `a + b ≤ 2`.
fn beta_exp(a: u32, b: u32, x: f64) -> f64 {
    debug_assert!(x <= 0.0 && a + b <= 2);
    if x > -1.0 {
        return beta_exp_series(a, b, x);
    }
    let g0 = x.exp_m1() / x;
    let g1 = (x.exp() * (x - 1.0) + 1.0) / (x * x);
    let g2 = (x.exp() * (x * x - 2.0 * x + 2.0) - 2.0) / (x * x * x);
    match (a, b) {
        (0, 0) => g0,
        (1, 0) => g1,
        (2, 0) => g2,
        (0, 1) => g0 - g1,
        (1, 1) => g1 - g2,
        (0, 2) => g0 - 2.0 * g1 + g2,
        _ => unreachable!("moment order above 2"),
    }
}

/// Taylor series `Σ_j x^j/j! · B(a+j+1, b+1)`, accurate for `|x| ≤ 1`.
fn beta_exp_series(a: u32, b: u32, x: f64) -> f64 {
    let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
    let (a, b) = (f64::from(a), f64::from(b));
    let b_fact = fact(b as u32);
    let mut term_x = 1.0; // x^j / j!
    let mut total = 0.0;
    for j in 0..30u32 {
        let jf = f64::from(j);
        // B(a+j+1, b+1) = (a+j)! b! / (a+j+b+1)!
        let mut beta = b_fact;
        for k in 0..=(b as u32) {
            beta /= a + jf + 1.0 + f64::from(k);
        }
        let term = term_x * beta;
        total += term;
        if term.abs() < 1e-18 * total.abs() {
            break;
        }
        term_x *= x / (jf + 1.0);
    }
    total
}
