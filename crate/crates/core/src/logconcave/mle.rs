//! Active-set maximisation of the log-concave likelihood.
//!
//! The log-density is parametrised by its values at a working set of knots
//! (always containing both extreme observations). For a fixed working set the
//! objective `Σ p_i φ(t_i) − ∫ exp φ` is smooth and strictly concave in those
//! values and is maximised by a damped Newton method whose steps are cut
//! short wherever a knot's kink would turn convex; such knots leave the set.
//! When the working set is optimal, the directional derivative of adding a
//! concave kink at each remaining observation is computed in O(1) from prefix
//! sums, and the best candidate enters the set. The method stops when no
//! candidate has a positive derivative, which certifies the global optimum.

use super::density::LogLinearDensity;
use super::segment::seg_moment;
use crate::error::{Result, ShapeError};
use crate::shape::{least_concave_majorant, PlanarPoints, SortedSample};

/// Largest admissible directional derivative at the optimum.
const ADD_TOL: f64 = 1e-11;
/// Gradient sup-norm at which a working-set problem counts as solved.
const GRAD_TOL: f64 = 1e-13;
const MAX_NEWTON: usize = 200;
const MAX_OUTER: usize = 100_000;

struct Problem {
    z: Vec<f64>,
    p: Vec<f64>,
    /// prefix sums of p and p·z: `c0[i] = Σ_{k<i} p_k`
    c0: Vec<f64>,
    c1: Vec<f64>,
}

impl Problem {
    fn new(z: Vec<f64>, p: Vec<f64>) -> Self {
        let mut c0 = vec![0.0; z.len() + 1];
        let mut c1 = vec![0.0; z.len() + 1];
        for i in 0..z.len() {
            c0[i + 1] = c0[i] + p[i];
            c1[i + 1] = c1[i] + p[i] * z[i];
        }
        Self { z, p, c0, c1 }
    }

    fn sum0(&self, lo: usize, hi: usize) -> f64 {
        self.c0[hi] - self.c0[lo]
    }

    fn sum1(&self, lo: usize, hi: usize) -> f64 {
        self.c1[hi] - self.c1[lo]
    }

    /// Gradient of the data term with respect to knot values.
    fn data_gradient(&self, knots: &[usize]) -> Vec<f64> {
        let mut g = vec![0.0; knots.len()];
        for s in 0..knots.len() - 1 {
            let (a, b) = (knots[s], knots[s + 1]);
            let (za, zb) = (self.z[a], self.z[b]);
            let s0 = self.sum0(a, b);
            let s1 = self.sum1(a, b);
            let right = (s1 - za * s0) / (zb - za);
            g[s] += s0 - right;
            g[s + 1] += right;
        }
        *g.last_mut().unwrap() += self.p[*knots.last().unwrap()];
        g
    }

    fn objective(&self, knots: &[usize], v: &[f64], gdata: &[f64]) -> f64 {
        let data: f64 = gdata.iter().zip(v).map(|(g, x)| g * x).sum();
        let integral: f64 = (0..knots.len() - 1)
            .map(|s| (self.z[knots[s + 1]] - self.z[knots[s]]) * seg_moment(0, 0, v[s], v[s + 1]))
            .sum();
        data - integral
    }

    /// Gradient and (negated) tridiagonal Hessian of the objective.
    fn derivatives(
        &self,
        knots: &[usize],
        v: &[f64],
        gdata: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let k = knots.len();
        let mut grad = gdata.to_vec();
        let mut diag = vec![0.0; k];
        let mut off = vec![0.0; k - 1];
        for s in 0..k - 1 {
            let h = self.z[knots[s + 1]] - self.z[knots[s]];
            let (r, t) = (v[s], v[s + 1]);
            grad[s] -= h * seg_moment(1, 0, r, t);
            grad[s + 1] -= h * seg_moment(0, 1, r, t);
            diag[s] += h * seg_moment(2, 0, r, t);
            diag[s + 1] += h * seg_moment(0, 2, r, t);
            off[s] = h * seg_moment(1, 1, r, t);
        }
        (grad, diag, off)
    }

    /// Kink `slope_left − slope_right` at each interior knot.
    fn kinks(&self, knots: &[usize], v: &[f64]) -> Vec<f64> {
        let slope = |s: usize| (v[s + 1] - v[s]) / (self.z[knots[s + 1]] - self.z[knots[s]]);
        (1..knots.len() - 1).map(|j| slope(j - 1) - slope(j)).collect()
    }

    /// Derivative of the objective along `−(x − z_j)₊` for every observation
    /// strictly between knots, scaled so that it can be compared across
    /// candidates. Returns the best candidate and its derivative.
    fn best_candidate(&self, knots: &[usize], v: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for s in 0..knots.len() - 1 {
            let (a, b) = (knots[s], knots[s + 1]);
            if b - a < 2 {
                continue;
            }
            let (za, zb) = (self.z[a], self.z[b]);
            let slope = (v[s + 1] - v[s]) / (zb - za);
            for j in a + 1..b {
                let zj = self.z[j];
                let (hl, hr) = (zj - za, zb - zj);
                let vj = v[s] + slope * hl;
                // derivative along the hat that is 0 at a and b and 1 at j
                let data = (self.sum1(a, j + 1) - za * self.sum0(a, j + 1)) / hl
                    + (zb * self.sum0(j + 1, b + 1) - self.sum1(j + 1, b + 1)) / hr;
                let integral = hl * seg_moment(0, 1, v[s], vj) + hr * seg_moment(1, 0, vj, v[s + 1]);
                let d = data - integral;
                if best.is_none_or(|(_, bd)| d > bd) {
                    best = Some((j, d));
                }
            }
        }
        best
    }
}

/// Solves `A x = rhs` for a symmetric positive definite tridiagonal `A` with
/// diagonal `diag` and off-diagonal `off`.
fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if !(denom > 0.0) {
        return None;
    }
    if n > 1 {
        c[0] = off[0] / denom;
    }
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - off[i - 1] * c[i - 1];
        if !(denom > 0.0) {
            return None;
        }
        if i < n - 1 {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

struct State {
    knots: Vec<usize>,
    v: Vec<f64>,
}

impl State {
    fn value_at(&self, prob: &Problem, j: usize) -> (usize, f64) {
        let s = self.knots.partition_point(|&k| k <= j) - 1;
        let (a, b) = (self.knots[s], self.knots[s + 1]);
        let (za, zb) = (prob.z[a], prob.z[b]);
        (s, self.v[s] + (self.v[s + 1] - self.v[s]) * (prob.z[j] - za) / (zb - za))
    }

    fn full_profile(&self, prob: &Problem) -> Vec<f64> {
        let mut out = Vec::with_capacity(prob.z.len());
        for s in 0..self.knots.len() - 1 {
            let (a, b) = (self.knots[s], self.knots[s + 1]);
            let slope = (self.v[s + 1] - self.v[s]) / (prob.z[b] - prob.z[a]);
            for j in a..b {
                out.push(self.v[s] + slope * (prob.z[j] - prob.z[a]));
            }
        }
        out.push(*self.v.last().unwrap());
        out
    }
}

/// Maximises the working-set objective, dropping knots whose kink vanishes.
fn optimise_working_set(prob: &Problem, st: &mut State) -> Result<f64> {
    let mut gdata = prob.data_gradient(&st.knots);
    let mut obj = prob.objective(&st.knots, &st.v, &gdata);
    for _ in 0..MAX_NEWTON {
        let (grad, diag, off) = prob.derivatives(&st.knots, &st.v, &gdata);
        let gnorm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gnorm < GRAD_TOL {
            return Ok(obj);
        }
        let step = solve_tridiagonal(&diag, &off, &grad)
            .ok_or_else(|| ShapeError::Numerical("singular Newton system".into()))?;
        let slope_gain: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
        if slope_gain <= 1e-30 {
            return Ok(obj);
        }
        // largest feasible fraction of the step
        let k0 = prob.kinks(&st.knots, &st.v);
        let trial: Vec<f64> = st.v.iter().zip(&step).map(|(v, s)| v + s).collect();
        let k1 = prob.kinks(&st.knots, &trial);
        let mut tmax = 1.0f64;
        let mut blocker = None;
        for (j, (&a, &b)) in k0.iter().zip(&k1).enumerate() {
            if b < 0.0 {
                let t = (a / (a - b)).max(0.0);
                if t < tmax {
                    tmax = t;
                    blocker = Some(j + 1);
                }
            }
        }
        let mut t = tmax;
        let mut accepted = None;
        while t > 1e-12 {
            let cand: Vec<f64> = st.v.iter().zip(&step).map(|(v, s)| v + t * s).collect();
            let val = prob.objective(&st.knots, &cand, &gdata);
            if val >= obj + 1e-4 * t * slope_gain || (t == tmax && blocker.is_some() && val >= obj) {
                accepted = Some((cand, val));
                break;
            }
            t *= 0.5;
        }
        let reached_blocker = blocker.is_some() && t == tmax;
        match accepted {
            Some((cand, val)) => {
                st.v = cand;
                obj = val;
            }
            None if !reached_blocker => return Ok(obj),
            None => {}
        }
        if let (Some(j), true) = (blocker, reached_blocker) {
            // the blocking knot is now (numerically) a straight pass-through
            st.knots.remove(j);
            st.v.remove(j);
            gdata = prob.data_gradient(&st.knots);
            obj = prob.objective(&st.knots, &st.v, &gdata);
        }
    }
    Ok(obj)
}

/// Adds knot `j` and moves along `−(x − z_j)₊` (which keeps every other kink
/// unchanged) until the objective stops increasing.
fn insert_knot(prob: &Problem, st: &mut State, j: usize) {
    let (s, vj) = st.value_at(prob, j);
    st.knots.insert(s + 1, j);
    st.v.insert(s + 1, vj);
    let zj = prob.z[j];
    let dir: Vec<f64> = st
        .knots
        .iter()
        .map(|&k| -(prob.z[k] - zj).max(0.0))
        .collect();
    let gdata = prob.data_gradient(&st.knots);
    let mut obj = prob.objective(&st.knots, &st.v, &gdata);
    for _ in 0..20 {
        let (grad, diag, off) = prob.derivatives(&st.knots, &st.v, &gdata);
        let d1: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if d1 <= 0.0 {
            break;
        }
        let mut d2 = 0.0;
        for i in 0..dir.len() {
            d2 += diag[i] * dir[i] * dir[i];
            if i + 1 < dir.len() {
                d2 += 2.0 * off[i] * dir[i] * dir[i + 1];
            }
        }
        let mut t = if d2 > 0.0 { d1 / d2 } else { 1.0 };
        let mut moved = false;
        while t > 1e-14 {
            let cand: Vec<f64> = st.v.iter().zip(&dir).map(|(v, d)| v + t * d).collect();
            let val = prob.objective(&st.knots, &cand, &gdata);
            if val > obj {
                st.v = cand;
                obj = val;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
}

/// Log-concave maximum likelihood estimator of a sample with at least two
/// distinct values. The returned density has a knot at every distinct
/// observation and is supported on `[min, max]`.
pub fn logconcave_mle(sample: &SortedSample) -> Result<LogLinearDensity> {
    if sample.distinct() < 2 {
        return Err(ShapeError::Degenerate(
            "log-concave MLE needs at least 2 distinct observations".into(),
        ));
    }
    let (lo, hi) = (sample.min(), sample.max());
    let range = hi - lo;
    // work on [0, 1] so that tolerances are scale free
    let z: Vec<f64> = sample
        .values()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if i + 1 == sample.distinct() {
                1.0
            } else {
                (x - lo) / range
            }
        })
        .collect();
    let m = z.len();
    let prob = Problem::new(z, sample.probabilities());
    let mut st = State {
        knots: vec![0, m - 1],
        v: vec![0.0, 0.0],
    };
    let mut obj = optimise_working_set(&prob, &mut st)?;
    let mut outer = 0;
    loop {
        let Some((j, d)) = prob.best_candidate(&st.knots, &st.v) else {
            break;
        };
        if d <= ADD_TOL {
            break;
        }
        outer += 1;
        if outer > MAX_OUTER {
            return Err(ShapeError::NonConvergence {
                iterations: outer,
                objective: obj,
                best: st.full_profile(&prob),
            });
        }
        insert_knot(&prob, &mut st, j);
        let next = optimise_working_set(&prob, &mut st)?;
        if next <= obj && d <= 1e3 * ADD_TOL {
            // roundoff floor: the candidate cannot improve the objective
            break;
        }
        obj = next;
    }
    // interpolate between knots in the original coordinates: rescaling error
    // would otherwise bend the log-density between close observations
    let x = sample.values();
    let mass: f64 = (0..st.knots.len() - 1)
        .map(|s| {
            let (a, b) = (st.knots[s], st.knots[s + 1]);
            (prob.z[b] - prob.z[a]) * seg_moment(0, 0, st.v[s], st.v[s + 1])
        })
        .sum();
    let shift = range.ln() + mass.ln();
    let mut logvals = Vec::with_capacity(m);
    for s in 0..st.knots.len() - 1 {
        let (a, b) = (st.knots[s], st.knots[s + 1]);
        let slope = (st.v[s + 1] - st.v[s]) / (x[b] - x[a]);
        let base = st.v[s] - shift;
        for &xj in &x[a..b] {
            logvals.push(base + slope * (xj - x[a]));
        }
    }
    logvals.push(st.v[st.knots.len() - 1] - shift);
    // the tent over the fitted heights, which clears kinks that the working
    // set left convex at roundoff level
    let hull = least_concave_majorant(&PlanarPoints::new(x.to_vec(), logvals.clone())?)?;
    let (hk, hv) = (hull.knots(), hull.vals());
    let mut seg = 0;
    for (j, &xj) in x.iter().enumerate() {
        while seg + 2 < hk.len() && xj >= hk[seg + 1] {
            seg += 1;
        }
        logvals[j] = if xj == hk[seg] {
            hv[seg]
        } else if xj == hk[seg + 1] {
            hv[seg + 1]
        } else {
            hv[seg] + (hv[seg + 1] - hv[seg]) / (hk[seg + 1] - hk[seg]) * (xj - hk[seg])
        };
    }
    LogLinearDensity::new(x.to_vec(), logvals)
}
