//! Tent functions and the concave surrogate objective whose maximiser gives
//! the log-concave MLE.

use serde::{Deserialize, Serialize};

use super::segment::seg_moment;
use crate::error::{invalid, Result};
use crate::shape::{least_concave_majorant, PiecewiseLinearFn, PlanarPoints, SortedSample};

/// Pole heights, one per distinct sample point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TentHeights(pub Vec<f64>);

impl TentHeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Relative tolerance for deciding that a pole touches the tent.
const TOUCH_TOL: f64 = 1e-10;

/// Smallest concave function above the poles `(t_i, y_i)` on `[t_1, t_m]`.
pub fn tent_function(y: &TentHeights, sample: &SortedSample) -> Result<PiecewiseLinearFn> {
    check_len(y, sample)?;
    if sample.distinct() < 2 {
        return invalid("a tent needs at least 2 distinct points");
    }
    least_concave_majorant(&PlanarPoints::new(sample.values().to_vec(), y.0.clone())?)
}

fn check_len(y: &TentHeights, sample: &SortedSample) -> Result<()> {
    if y.0.len() != sample.distinct() {
        return invalid(format!(
            "{} tent heights for {} distinct points",
            y.0.len(),
            sample.distinct()
        ));
    }
    if y.0.iter().any(|v| !v.is_finite()) {
        return invalid("tent heights must be finite");
    }
    Ok(())
}

fn exp_integral(tent: &PiecewiseLinearFn) -> f64 {
    tent.knots()
        .windows(2)
        .zip(tent.vals().windows(2))
        .map(|(k, v)| (k[1] - k[0]) * seg_moment(0, 0, v[0], v[1]))
        .sum()
}

/// `σ(y) = (1/n) Σ w_i y_i − ∫ exp(h̄_y)`.
pub fn sigma_objective(y: &TentHeights, sample: &SortedSample) -> Result<f64> {
    let tent = tent_function(y, sample)?;
    let data: f64 = sample
        .probabilities()
        .iter()
        .zip(&y.0)
        .map(|(p, v)| p * v)
        .sum();
    Ok(data - exp_integral(&tent))
}

/// A supergradient of `σ` at `y`.
///
/// Points strictly below the tent receive no share of the integral term. On a
/// tent segment with interior touching points, the segment's mass is first
/// offered to those points in proportion to their empirical weights, with the
/// remainder split between the segment ends to match the segment's first
/// moment. That allocation is used whenever it is a valid subgradient of the
/// integral (it vanishes at the optimum); otherwise every touching point is
/// treated as a knot, which always is.
pub fn sigma_supergradient(y: &TentHeights, sample: &SortedSample) -> Result<Vec<f64>> {
    let tent = tent_function(y, sample)?;
    let t = sample.values();
    let p = sample.probabilities();
    let knots = tent.knots();
    let vals = tent.vals();
    let slopes = tent.slopes();
    // hull vertices whose kink is at roundoff level do not split a segment
    let mut ends = vec![0usize];
    for k in 1..knots.len() - 1 {
        let (l, r) = (slopes[k - 1], slopes[k]);
        if l - r > KINK_TOL * (1.0 + l.abs() + r.abs()) {
            ends.push(k);
        }
    }
    ends.push(knots.len() - 1);
    let index_of = |x: f64| t.partition_point(|&v| v < x);
    let mut nu = vec![0.0; t.len()];
    for w in ends.windows(2) {
        let pieces: Vec<Piece> = (w[0]..w[1])
            .map(|k| Piece {
                x0: knots[k],
                x1: knots[k + 1],
                v0: vals[k],
                v1: vals[k + 1],
            })
            .collect();
        let (ia, ib) = (index_of(knots[w[0]]), index_of(knots[w[1]]));
        let touching: Vec<usize> = (ia + 1..ib)
            .filter(|&j| {
                let hv = tent.eval_clamped(t[j]);
                (hv - y.0[j]).abs() <= TOUCH_TOL * (1.0 + hv.abs())
            })
            .collect();
        let canonical = if touching.is_empty() {
            None
        } else {
            canonical_allocation(&touching, t, &p, &pieces)
        };
        match canonical {
            Some((nua, nub)) => {
                nu[ia] += nua;
                nu[ib] += nub;
                for &j in &touching {
                    nu[j] += p[j];
                }
            }
            None => {
                let mut poles = vec![ia];
                poles.extend(&touching);
                poles.push(ib);
                for pw in poles.windows(2) {
                    let (l, r) = (pw[0], pw[1]);
                    let (hl, hr) = (tent.eval_clamped(t[l]), tent.eval_clamped(t[r]));
                    let len = t[r] - t[l];
                    nu[l] += len * seg_moment(1, 0, hl, hr);
                    nu[r] += len * seg_moment(0, 1, hl, hr);
                }
            }
        }
    }
    Ok(p.iter().zip(&nu).map(|(pi, ni)| pi - ni).collect())
}

/// Relative slope change below which a hull vertex counts as collinear.
const KINK_TOL: f64 = 1e-9;

/// A linear piece of the tent.
struct Piece {
    x0: f64,
    x1: f64,
    v0: f64,
    v1: f64,
}

impl Piece {
    fn mass(&self) -> f64 {
        (self.x1 - self.x0) * seg_moment(0, 0, self.v0, self.v1)
    }

    /// `∫ (x − c) e^{h̄}` over the piece.
    fn moment_about(&self, c: f64) -> f64 {
        let h = self.x1 - self.x0;
        (self.x0 - c) * self.mass() + h * h * seg_moment(0, 1, self.v0, self.v1)
    }

    /// `∫ (x − c)₊ e^{h̄}` over the piece.
    fn positive_part_moment(&self, c: f64) -> f64 {
        if c <= self.x0 {
            return self.moment_about(c);
        }
        if c >= self.x1 {
            return 0.0;
        }
        let vc = self.v0 + (self.v1 - self.v0) * (c - self.x0) / (self.x1 - self.x0);
        Piece {
            x0: c,
            x1: self.x1,
            v0: vc,
            v1: self.v1,
        }
        .moment_about(c)
    }
}

/// Endpoint shares `(ν_a, ν_b)` when interior touching points take their own
/// empirical weight, or `None` if the resulting allocation is not a
/// subgradient of the integral term.
fn canonical_allocation(
    touching: &[usize],
    t: &[f64],
    p: &[f64],
    pieces: &[Piece],
) -> Option<(f64, f64)> {
    let a = pieces[0].x0;
    let b = pieces.last().unwrap().x1;
    let h = b - a;
    let mass: f64 = pieces.iter().map(Piece::mass).sum();
    let about_a: f64 = pieces.iter().map(|q| q.moment_about(a)).sum();
    let pin: f64 = touching.iter().map(|&j| p[j]).sum();
    let pin_a: f64 = touching.iter().map(|&j| p[j] * (t[j] - a)).sum();
    let nub = (about_a - pin_a) / h;
    let nua = mass - pin - nub;
    let scale = mass.max(f64::MIN_POSITIVE);
    if nua < -ALLOC_TOL * scale || nub < -ALLOC_TOL * scale {
        return None;
    }
    // Σν (t − t_j)₊ must dominate ∫ (x − t_j)₊ e^{h̄} for every interior pole
    for &j in touching {
        let tj = t[j];
        let integral: f64 = pieces.iter().map(|q| q.positive_part_moment(tj)).sum();
        let mut alloc = nub * (b - tj);
        for &k in touching {
            if t[k] > tj {
                alloc += p[k] * (t[k] - tj);
            }
        }
        if alloc < integral - ALLOC_TOL * scale * h {
            return None;
        }
    }
    Some((nua.max(0.0), nub.max(0.0)))
}

/// Relative slack in the validity checks of the canonical allocation.
const ALLOC_TOL: f64 = 1e-10;
