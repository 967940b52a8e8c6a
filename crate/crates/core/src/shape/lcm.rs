use serde::{Deserialize, Serialize};

use super::density::DistributionFunction;
use super::sample::SortedSample;
use crate::error::{invalid, Result, ShapeError};

/// Absolute tolerance on slope differences used by concavity assertions.
pub const CONCAVITY_TOL: f64 = 1e-12;

/// Relative slack in the hull orientation test, so that points collinear up
/// to roundoff are dropped.
const COLLINEAR_TOL: f64 = 1e-14;

/// Points of a planar graph with nondecreasing abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarPoints {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl PlanarPoints {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return invalid("x and y must have equal length");
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return invalid("points must be finite");
        }
        if x.windows(2).any(|w| w[0] > w[1]) {
            return invalid("x must be nondecreasing");
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Cumulative-sum diagram of a sample: `(x_(j), F_n(x_(j)))`, optionally
/// prefixed by `(origin, 0)`.
pub fn cumulative_diagram(sample: &SortedSample, origin: Option<f64>) -> PlanarPoints {
    let n = sample.n() as f64;
    let mut x = Vec::with_capacity(sample.distinct() + 1);
    let mut y = Vec::with_capacity(sample.distinct() + 1);
    if let Some(o) = origin {
        x.push(o);
        y.push(0.0);
    }
    let mut cum = 0.0;
    for (&v, &w) in sample.values().iter().zip(sample.weights()) {
        cum += w;
        x.push(v);
        y.push(cum / n);
    }
    // guard against the last cumulative sum drifting from exactly one
    if let Some(last) = y.last_mut() {
        *last = 1.0;
    }
    PlanarPoints { x, y }
}

/// Linear interpolant of `(knots, vals)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearFn {
    knots: Vec<f64>,
    vals: Vec<f64>,
    concave: bool,
}

impl PiecewiseLinearFn {
    /// Needs at least two strictly increasing knots. The concavity flag is set
    /// when successive slopes are nonincreasing up to [`CONCAVITY_TOL`].
    pub fn new(knots: Vec<f64>, vals: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != vals.len() {
            return invalid("piecewise-linear function needs ≥ 2 knots and matching values");
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("knots must be strictly increasing");
        }
        if knots.iter().chain(&vals).any(|v| !v.is_finite()) {
            return invalid("knots and values must be finite");
        }
        let mut f = Self {
            knots,
            vals,
            concave: false,
        };
        f.concave = f.slopes().windows(2).all(|s| s[1] <= s[0] + CONCAVITY_TOL);
        Ok(f)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn vals(&self) -> &[f64] {
        &self.vals
    }

    pub fn is_concave(&self) -> bool {
        self.concave
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    /// Segment slopes, one per pair of consecutive knots.
    pub fn slopes(&self) -> Vec<f64> {
        self.knots
            .windows(2)
            .zip(self.vals.windows(2))
            .map(|(k, v)| (v[1] - v[0]) / (k[1] - k[0]))
            .collect()
    }

    fn segment_value(&self, j: usize, x: f64) -> f64 {
        let (x0, x1) = (self.knots[j], self.knots[j + 1]);
        let (y0, y1) = (self.vals[j], self.vals[j + 1]);
        if x == x1 {
            return y1;
        }
        let t = (x - x0) / (x1 - x0);
        y0 + t * (y1 - y0)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(ShapeError::Domain(format!("{x} outside [{lo}, {hi}]")));
        }
        Ok(self.eval_clamped(x))
    }

    /// Evaluates, extending by the end values outside the domain.
    pub fn eval_clamped(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        if x <= lo {
            return self.vals[0];
        }
        if x >= hi {
            return *self.vals.last().unwrap();
        }
        let j = self.knots.partition_point(|&k| k <= x) - 1;
        self.segment_value(j, x)
    }

    /// Slope of the segment immediately left of `x`; `x` in `(first, last]`.
    pub fn left_derivative(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(x > lo && x <= hi) {
            return Err(ShapeError::Domain(format!(
                "left derivative needs x in ({lo}, {hi}], got {x}"
            )));
        }
        let j = self.knots.partition_point(|&k| k < x) - 1;
        Ok(self.segment_slope(j))
    }

    /// Slope of the segment immediately right of `x`; `x` in `[first, last)`.
    pub fn right_derivative(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x < hi) {
            return Err(ShapeError::Domain(format!(
                "right derivative needs x in [{lo}, {hi}), got {x}"
            )));
        }
        let j = self.knots.partition_point(|&k| k <= x) - 1;
        Ok(self.segment_slope(j))
    }

    /// Right derivative on the closed domain, taking the limit from the left
    /// at the last knot.
    pub fn right_derivative_with_limit(&self, x: f64) -> Result<f64> {
        let (_, hi) = self.domain();
        if x == hi {
            return Ok(self.segment_slope(self.knots.len() - 2));
        }
        self.right_derivative(x)
    }

    fn segment_slope(&self, j: usize) -> f64 {
        (self.vals[j + 1] - self.vals[j]) / (self.knots[j + 1] - self.knots[j])
    }
}

impl DistributionFunction for PiecewiseLinearFn {
    fn value(&self, x: f64) -> f64 {
        self.eval_clamped(x)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.knots.clone()
    }

    fn is_piecewise_linear(&self) -> bool {
        true
    }

    fn span(&self) -> (f64, f64) {
        self.domain()
    }
}

/// Least concave majorant of a point set, by a single upper-hull sweep.
///
/// Points sharing an abscissa are reduced to the one with the largest
/// ordinate. The returned knots are a subset of the input abscissae and the
/// function agrees with the input at every knot; collinear interior points are
/// dropped.
pub fn least_concave_majorant(points: &PlanarPoints) -> Result<PiecewiseLinearFn> {
    let mut xs: Vec<f64> = Vec::with_capacity(points.len());
    let mut ys: Vec<f64> = Vec::with_capacity(points.len());
    for (&x, &y) in points.x.iter().zip(&points.y) {
        match xs.last() {
            Some(&lx) if lx == x => {
                let ly = ys.last_mut().unwrap();
                if y > *ly {
                    *ly = y;
                }
            }
            _ => {
                xs.push(x);
                ys.push(y);
            }
        }
    }
    if xs.len() < 2 {
        return invalid("least concave majorant needs at least 2 distinct abscissae");
    }
    let mut hx: Vec<f64> = Vec::with_capacity(xs.len());
    let mut hy: Vec<f64> = Vec::with_capacity(xs.len());
    for (&x, &y) in xs.iter().zip(&ys) {
        while hx.len() >= 2 {
            let k = hx.len();
            let (ox, oy) = (hx[k - 2], hy[k - 2]);
            let (ax, ay) = (hx[k - 1], hy[k - 1]);
            // drop the middle point when it is on or below the chord
            let (l, r) = ((ax - ox) * (y - oy), (ay - oy) * (x - ox));
            if l - r >= -COLLINEAR_TOL * (l.abs() + r.abs()) {
                hx.pop();
                hy.pop();
            } else {
                break;
            }
        }
        hx.push(x);
        hy.push(y);
    }
    let mut f = PiecewiseLinearFn::new(hx, hy)?;
    f.concave = true;
    Ok(f)
}
