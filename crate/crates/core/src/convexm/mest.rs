use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::loss::ConvexLoss;
use crate::error::{invalid, Result, ShapeError};

/// Largest accepted condition number of the Gram matrix `XᵀX`.
pub const GRAM_CONDITION_LIMIT: f64 = 1e10;

/// Iteration budget of [`m_estimate`].
pub const MAX_ITERATIONS: usize = 500;

/// Relative gradient tolerance: converged when the smallest subgradient has
/// sup-norm below `GRADIENT_TOL·(1 + ‖Y‖∞)`.
pub const GRADIENT_TOL: f64 = 1e-8;

/// Reweighting steps of the least-absolute-deviations pilot.
const LAD_PILOT_STEPS: usize = 30;

const ARMIJO: f64 = 1e-4;

/// Responses and design of a linear model `Y = Xβ + ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModelData {
    x: DMatrix<f64>,
    y: DVector<f64>,
    /// Row-major copy of `x`.
    rows: Vec<f64>,
    intercept: bool,
}

impl LinearModelData {
    /// Builds the design from covariate rows, prepending a column of ones
    /// when `intercept` is set.
    pub fn new(covariates: &[Vec<f64>], y: Vec<f64>, intercept: bool) -> Result<Self> {
        let n = y.len();
        if covariates.len() != n {
            return invalid("design and response lengths differ");
        }
        let p = covariates.first().map_or(0, |r| r.len());
        if covariates.iter().any(|r| r.len() != p) {
            return invalid("design rows have unequal lengths");
        }
        let d = p + usize::from(intercept);
        if d == 0 {
            return invalid("model has no coefficients");
        }
        let mut rows = Vec::with_capacity(n * d);
        for r in covariates {
            if intercept {
                rows.push(1.0);
            }
            rows.extend_from_slice(r);
        }
        Self::from_row_major(rows, y, d, intercept)
    }

    /// Location model: intercept only.
    pub fn intercept_only(y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(&vec![Vec::new(); n], y, true)
    }

    fn from_row_major(rows: Vec<f64>, y: Vec<f64>, d: usize, intercept: bool) -> Result<Self> {
        let n = y.len();
        if n <= d {
            return invalid(format!("need more observations ({n}) than coefficients ({d})"));
        }
        if rows.iter().chain(&y).any(|v| !v.is_finite()) {
            return invalid("design and response must be finite");
        }
        let x = DMatrix::from_row_slice(n, d, &rows);
        for j in 0..d {
            if x.column(j).iter().all(|&v| v == 0.0) {
                return invalid(format!("design column {j} is identically zero"));
            }
        }
        let sv = x.clone().svd(false, false).singular_values;
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > 0.0) || (smax / smin).powi(2) > GRAM_CONDITION_LIMIT {
            return invalid("Gram matrix is numerically singular");
        }
        Ok(Self { x, y: DVector::from_vec(y), rows, intercept })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    pub fn y(&self) -> &[f64] {
        self.y.as_slice()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.d();
        &self.rows[i * d..(i + 1) * d]
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn residuals(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.y[i] - dot(self.row(i), beta))
            .collect()
    }

    fn y_scale(&self) -> f64 {
        1.0 + self.y.amax()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fitted coefficients of a linear model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MEstimate {
    pub beta: Vec<f64>,
    pub variance_factor: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub objective: f64,
}

/// Ordinary least squares through a QR factorization of the design.
pub fn ols(data: &LinearModelData) -> Result<MEstimate> {
    let qr = data.x.clone().qr();
    let qty = qr.q().transpose() * &data.y;
    let beta = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| ShapeError::Degenerate("singular design in least squares".into()))?;
    let beta: Vec<f64> = beta.iter().copied().collect();
    let r = data.residuals(&beta);
    let n = data.n() as f64;
    let ms = r.iter().map(|v| v * v).sum::<f64>() / n;
    Ok(MEstimate { beta, variance_factor: ms, iterations: 1, objective: 0.5 * ms })
}

/// Rough least-absolute-deviations fit by iteratively reweighted least
/// squares; a starting point that heavy-tailed responses cannot drag away.
pub(crate) fn lad_pilot(data: &LinearModelData) -> Result<Vec<f64>> {
    let mut beta = ols(data)?.beta;
    let floor = 1e-8 * data.y_scale();
    for _ in 0..LAD_PILOT_STEPS {
        let r = data.residuals(&beta);
        let w = DVector::from_iterator(r.len(), r.iter().map(|v| 1.0 / v.abs().max(floor)));
        let xw = DMatrix::from_fn(data.n(), data.d(), |i, j| data.x[(i, j)] * w[i]);
        let gram = data.x.transpose() * &xw;
        let rhs = xw.transpose() * &data.y;
        match gram.cholesky() {
            Some(ch) => beta = ch.solve(&rhs).iter().copied().collect(),
            None => break,
        }
    }
    Ok(beta)
}

/// Empirical risk `n⁻¹ Σ ℓ(Yᵢ − Xᵢᵀβ)` and its minimization.
struct Risk<'a> {
    data: &'a LinearModelData,
    loss: &'a ConvexLoss,
    /// Jump locations and sizes of ψ.
    jumps: Vec<(f64, f64)>,
}

impl<'a> Risk<'a> {
    fn new(data: &'a LinearModelData, loss: &'a ConvexLoss) -> Self {
        Self { data, loss, jumps: loss.score().jumps() }
    }

    fn objective(&self, beta: &[f64]) -> f64 {
        let n = self.data.n();
        (0..n)
            .map(|i| self.loss.value(self.data.y[i] - dot(self.data.row(i), beta)))
            .sum::<f64>()
            / n as f64
    }

    /// Gradient with the right-continuous score, `n⁻¹ Σ ψ(rᵢ) Xᵢ`.
    fn gradient(&self, r: &[f64]) -> Vec<f64> {
        let d = self.data.d();
        let mut g = vec![0.0; d];
        for (i, &ri) in r.iter().enumerate() {
            let p = self.loss.psi(ri);
            for (gj, xj) in g.iter_mut().zip(self.data.row(i)) {
                *gj += p * xj;
            }
        }
        let n = r.len() as f64;
        g.iter_mut().for_each(|v| *v /= n);
        g
    }

    /// Jump of ψ sitting within `tol` of `r`, if any.
    fn jump_at(&self, r: f64, tol: f64) -> Option<(f64, f64)> {
        let k = self.jumps.partition_point(|&(z, _)| z < r - tol);
        self.jumps.get(k).copied().filter(|&(z, _)| (z - r).abs() <= tol)
    }

    /// Sup-norm of the smallest element of the subdifferential, treating
    /// residuals within `tol` of a jump as sitting on it.
    fn min_subgradient(&self, r: &[f64], tol: f64) -> f64 {
        let d = self.data.d();
        let n = r.len() as f64;
        let mut g = vec![0.0; d];
        let mut free: Vec<(usize, f64, f64)> = Vec::new();
        for (i, &ri) in r.iter().enumerate() {
            let row = self.data.row(i);
            let p = match self.jump_at(ri, tol) {
                Some((z, size)) => {
                    free.push((i, 0.0, size));
                    self.loss.psi(z)
                }
                None => self.loss.psi(ri),
            };
            for (gj, xj) in g.iter_mut().zip(row) {
                *gj += p * xj / n;
            }
        }
        // coordinate descent on the box of subgradient choices
        for _ in 0..200 {
            let mut moved = 0.0f64;
            for item in free.iter_mut() {
                let row = self.data.row(item.0);
                let xx: f64 = row.iter().map(|v| v * v).sum();
                if xx == 0.0 {
                    continue;
                }
                let xg = dot(row, &g);
                let t = (item.1 - n * xg / xx).clamp(0.0, item.2);
                let delta = t - item.1;
                if delta != 0.0 {
                    for (gj, xj) in g.iter_mut().zip(row) {
                        *gj += delta * xj / n;
                    }
                    item.1 = t;
                    moved = moved.max(delta.abs());
                }
            }
            if moved < 1e-15 {
                break;
            }
        }
        g.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Measure-smoothed curvature at each residual: the density of the
    /// absolutely continuous part plus each jump spread uniformly over a
    /// window of half-width `w`.
    fn curvatures(&self, r: &[f64], w: f64) -> Vec<f64> {
        r.iter()
            .map(|&ri| {
                let mut c = self.loss.curvature(ri);
                if !self.jumps.is_empty() {
                    let lo = self.jumps.partition_point(|&(z, _)| z < ri - w);
                    for &(z, size) in &self.jumps[lo..] {
                        if z > ri + w {
                            break;
                        }
                        c += size / (2.0 * w);
                    }
                }
                c
            })
            .collect()
    }

    fn hessian(&self, c: &[f64]) -> DMatrix<f64> {
        let d = self.data.d();
        let mut h = DMatrix::zeros(d, d);
        for (i, &ci) in c.iter().enumerate() {
            if ci == 0.0 {
                continue;
            }
            let row = self.data.row(i);
            for a in 0..d {
                for b in 0..=a {
                    h[(a, b)] += ci * row[a] * row[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                h[(b, a)] = h[(a, b)];
            }
        }
        h / c.len() as f64
    }

    fn gram(&self) -> DMatrix<f64> {
        self.hessian(&vec![1.0; self.data.n()])
    }

    /// Directional right derivative of the risk at step `s` along a
    /// direction whose residual rates are `a` (so `rᵢ(s) = rᵢ − s·aᵢ`).
    fn slope_along(&self, r: &[f64], a: &[f64], s: f64) -> f64 {
        let mut acc = 0.0;
        for (&ri, &ai) in r.iter().zip(a) {
            if ai > 0.0 {
                acc += ai * self.loss.psi_left(ri - s * ai);
            } else if ai < 0.0 {
                acc += ai * self.loss.psi(ri - s * ai);
            }
        }
        acc / r.len() as f64
    }
}

fn window_width(r: &[f64]) -> f64 {
    let mut v = r.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (v.len() - 1) as f64;
        let i = h.floor() as usize;
        let j = (i + 1).min(v.len() - 1);
        v[i] + (h - i as f64) * (v[j] - v[i])
    };
    let iqr = q(0.75) - q(0.25);
    let w = iqr / 50.0;
    if w > 0.0 {
        w
    } else {
        (v.iter().fold(0.0f64, |m, x| m.max(x.abs())) / 50.0).max(1e-12)
    }
}

fn solve_spd(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let d = h.nrows();
    let scale = (0..d).map(|i| h[(i, i)]).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    let mut ridge = 1e-12 * scale;
    for _ in 0..8 {
        let mut m = h.clone();
        for i in 0..d {
            m[(i, i)] += ridge;
        }
        if let Some(ch) = m.cholesky() {
            return Some(ch.solve(rhs));
        }
        ridge *= 100.0;
    }
    None
}

/// Minimizes `n⁻¹ Σ ℓ(Yᵢ − Xᵢᵀβ)`, starting from least squares or from a
/// rough least-absolute-deviations fit, whichever has the smaller risk.
pub fn m_estimate(data: &LinearModelData, loss: &ConvexLoss) -> Result<MEstimate> {
    let risk = Risk::new(data, loss);
    let ls = ols(data)?.beta;
    let pilot = lad_pilot(data)?;
    let start = if risk.objective(&pilot) < risk.objective(&ls) { pilot } else { ls };
    m_estimate_from(data, loss, &start)
}

/// [`m_estimate`] with an explicit starting point.
///
/// One coefficient is handled by bisection on the monotone derivative, with
/// the midpoint of the minimizing interval returned. Otherwise damped Newton
/// steps with Armijo backtracking are taken, using a smoothed curvature for
/// the jumps of `ψ`; if the loss has kinks and Newton stalls, an active-set
/// phase pins residuals to kinks and finishes with exact line searches.
pub fn m_estimate_from(
    data: &LinearModelData,
    loss: &ConvexLoss,
    start: &[f64],
) -> Result<MEstimate> {
    if start.len() != data.d() {
        return invalid("starting point has the wrong dimension");
    }
    let risk = Risk::new(data, loss);
    let tol = GRADIENT_TOL * data.y_scale();
    let (beta, iterations) = if data.d() == 1 {
        solve_scalar(&risk, start[0])?
    } else {
        solve_newton(&risk, start.to_vec(), tol)?
    };
    let objective = risk.objective(&beta);
    let r = data.residuals(&beta);
    let variance_factor = plugin_variance(&risk, &r);
    Ok(MEstimate { beta, variance_factor, iterations, objective })
}

/// `n⁻¹Σψ²(rᵢ) / (n⁻¹Σ smoothed ℓ''(rᵢ))²`.
fn plugin_variance(risk: &Risk, r: &[f64]) -> f64 {
    let n = r.len() as f64;
    let num = r.iter().map(|&v| risk.loss.psi(v).powi(2)).sum::<f64>() / n;
    let den = risk.curvatures(r, window_width(r)).iter().sum::<f64>() / n;
    if den > 0.0 {
        num / (den * den)
    } else {
        f64::INFINITY
    }
}

fn solve_scalar(risk: &Risk, start: f64) -> Result<(Vec<f64>, usize)> {
    let data = risk.data;
    let a: Vec<f64> = (0..data.n()).map(|i| data.row(i)[0]).collect();
    // right and left derivatives in β
    let deriv = |b: f64, right: bool| -> f64 {
        let mut acc = 0.0;
        for (i, &ai) in a.iter().enumerate() {
            let r = data.y[i] - ai * b;
            let down = (ai > 0.0) == right;
            acc += ai * if down { risk.loss.psi_left(r) } else { risk.loss.psi(r) };
        }
        acc / a.len() as f64
    };
    let mut evals = 0usize;
    // bracket [lo, hi] with deriv(lo+) < 0 ≤ deriv(hi+)
    let mut width = 1.0 + start.abs();
    let (mut lo, mut hi) = (start - width, start + width);
    while deriv(lo, false) > 0.0 {
        width *= 2.0;
        lo = start - width;
        evals += 1;
        if evals > 2000 || !lo.is_finite() {
            return Err(ShapeError::Numerical("risk has no minimizer".into()));
        }
    }
    while deriv(hi, true) < 0.0 {
        width *= 2.0;
        hi = start + width;
        evals += 1;
        if evals > 2000 || !hi.is_finite() {
            return Err(ShapeError::Numerical("risk has no minimizer".into()));
        }
    }
    let bisect = |mut l: f64, mut h: f64, pred: &dyn Fn(f64) -> bool, evals: &mut usize| {
        // invariant: !pred(l), pred(h)
        for _ in 0..2100 {
            let m = 0.5 * (l + h);
            if m <= l || m >= h {
                break;
            }
            *evals += 1;
            if pred(m) {
                h = m;
            } else {
                l = m;
            }
        }
        (l, h)
    };
    // smallest β with a nonnegative right derivative
    let low_end = if deriv(lo, true) >= 0.0 {
        lo
    } else {
        bisect(lo, hi, &|b| deriv(b, true) >= 0.0, &mut evals).1
    };
    // largest β with a nonpositive left derivative
    let high_end = if deriv(hi, false) <= 0.0 {
        hi
    } else {
        bisect(lo, hi, &|b| deriv(b, false) > 0.0, &mut evals).0
    };
    let beta = 0.5 * (low_end + high_end.max(low_end));
    Ok((vec![beta], evals))
}

fn solve_newton(risk: &Risk, mut beta: Vec<f64>, tol: f64) -> Result<(Vec<f64>, usize)> {
    let data = risk.data;
    let d = data.d();
    let kink_tol = 1e-9 * data.y_scale();
    let mut q = risk.objective(&beta);
    let mut iterations = 0;
    let mut polish = 0;
    let mut converged = false;
    let kinked = !risk.jumps.is_empty();
    // kinked losses leave half the budget to the active-set phase
    let budget = if kinked { MAX_ITERATIONS / 2 } else { MAX_ITERATIONS };
    while iterations < budget {
        let r = data.residuals(&beta);
        let sub = risk.min_subgradient(&r, kink_tol);
        if sub <= tol {
            converged = true;
            // a few extra steps sharpen smooth problems well below tolerance
            if polish >= 3 || sub <= 1e-6 * tol {
                break;
            }
            polish += 1;
        }
        let g = risk.gradient(&r);
        let mut c = risk.curvatures(&r, window_width(&r));
        let cmax = c.iter().cloned().fold(0.0, f64::max);
        if cmax > 0.0 {
            c.iter_mut().for_each(|v| *v = v.max(1e-6 * cmax));
        } else {
            c.iter_mut().for_each(|v| *v = 1.0);
        }
        let h = risk.hessian(&c);
        let gv = DVector::from_vec(g.clone());
        let Some(p) = solve_spd(&h, &(-&gv)) else {
            break;
        };
        let slope = gv.dot(&p);
        if !(slope < 0.0) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-14 {
            let cand: Vec<f64> = beta.iter().zip(p.iter()).map(|(b, s)| b + t * s).collect();
            let qc = risk.objective(&cand);
            if qc <= q + ARMIJO * t * slope {
                accepted = Some((cand, qc));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((cand, qc)) => {
                let step: f64 = cand.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let gain = q - qc;
                beta = cand;
                q = qc;
                if kinked && gain <= 1e-13 * (1.0 + q.abs()) {
                    break;
                }
                let scale = 1.0 + beta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if step <= 1e-15 * scale && converged {
                    break;
                }
            }
            None => break,
        }
    }
    if converged && risk.min_subgradient(&data.residuals(&beta), kink_tol) <= tol {
        return Ok((beta, iterations));
    }
    if !risk.jumps.is_empty() {
        return active_set(risk, beta, iterations, tol, d);
    }
    let r = data.residuals(&beta);
    if risk.min_subgradient(&r, kink_tol) <= tol {
        return Ok((beta, iterations));
    }
    Err(ShapeError::NonConvergence { iterations, objective: q, best: beta })
}

/// Pinned residual: observation index and the jump location it sits on.
#[derive(Clone, Copy)]
struct Pin {
    obs: usize,
    at: f64,
}

fn pinned_rows(data: &LinearModelData, pins: &[Pin]) -> DMatrix<f64> {
    let d = data.d();
    let mut m = DMatrix::zeros(pins.len(), d);
    for (k, p) in pins.iter().enumerate() {
        for (j, v) in data.row(p.obs).iter().enumerate() {
            m[(k, j)] = *v;
        }
    }
    m
}

fn rows_independent(m: &DMatrix<f64>) -> bool {
    if m.nrows() == 0 {
        return true;
    }
    if m.nrows() > m.ncols() {
        return false;
    }
    let norms: Vec<f64> = (0..m.nrows()).map(|i| m.row(i).norm()).collect();
    let mut scaled = m.clone();
    for (i, nrm) in norms.iter().enumerate() {
        if *nrm == 0.0 {
            return false;
        }
        scaled.row_mut(i).scale_mut(1.0 / nrm);
    }
    let sv = scaled.svd(false, false).singular_values;
    sv.min() > 1e-8
}

/// Moves `beta` onto the affine set where every pinned residual equals its
/// jump location.
fn project_onto_pins(data: &LinearModelData, pins: &[Pin], beta: &mut [f64]) {
    if pins.is_empty() {
        return;
    }
    let a = pinned_rows(data, pins);
    let resid = DVector::from_iterator(
        pins.len(),
        pins.iter().map(|p| data.y[p.obs] - p.at - dot(data.row(p.obs), beta)),
    );
    let aat = &a * a.transpose();
    if let Some(lu) = aat.lu().solve(&resid) {
        let delta = a.transpose() * lu;
        beta.iter_mut().zip(delta.iter()).for_each(|(b, d)| *b += d);
    }
}

fn active_set(
    risk: &Risk,
    mut beta: Vec<f64>,
    mut iterations: usize,
    tol: f64,
    d: usize,
) -> Result<(Vec<f64>, usize)> {
    let data = risk.data;
    let n = data.n();
    let kink_tol = 1e-9 * data.y_scale();
    let gram = risk.gram();
    let mut pins: Vec<Pin> = Vec::new();
    let mut q = risk.objective(&beta);
    let mut best = (beta.clone(), q);
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let r = data.residuals(&beta);
        let pinned: Vec<bool> = {
            let mut v = vec![false; n];
            pins.iter().for_each(|p| v[p.obs] = true);
            v
        };
        // gradient and exact curvature from the free residuals
        let mut g = DVector::zeros(d);
        let mut c = vec![0.0; n];
        for i in 0..n {
            if pinned[i] {
                continue;
            }
            let row = data.row(i);
            let p = risk.loss.psi(r[i]);
            for j in 0..d {
                g[j] += p * row[j] / n as f64;
            }
            c[i] = risk.loss.curvature(r[i]);
        }
        let mut h = risk.hessian(&c);
        let (th, tg) = (h.trace(), gram.trace());
        let mu = if th > 0.0 { 1e-8 * th / tg } else { 1.0 };
        h += &gram * mu;
        // equality-constrained Newton direction through the KKT system
        let k = pins.len();
        let a = pinned_rows(data, &pins);
        let mut kkt = DMatrix::zeros(d + k, d + k);
        kkt.view_mut((0, 0), (d, d)).copy_from(&h);
        kkt.view_mut((0, d), (d, k)).copy_from(&a.transpose());
        kkt.view_mut((d, 0), (k, d)).copy_from(&a);
        let mut rhs = DVector::zeros(d + k);
        rhs.rows_mut(0, d).copy_from(&(-&g));
        let sol = kkt
            .lu()
            .solve(&rhs)
            .ok_or_else(|| ShapeError::Numerical("singular active-set system".into()))?;
        let p: Vec<f64> = sol.rows(0, d).iter().copied().collect();
        let reduced = g.dot(&DVector::from_vec(p.clone()));
        let rates: Vec<f64> = (0..n)
            .map(|i| if pinned[i] { 0.0 } else { dot(data.row(i), &p) })
            .collect();
        let descent = risk.slope_along(&r, &rates, 0.0);
        let pnorm = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pnorm == 0.0 || !(descent < 0.0) || reduced == 0.0 {
            // stationary on the current face
            if risk.min_subgradient(&r, kink_tol) <= tol {
                return Ok((beta, iterations));
            }
            // a free residual sitting on a jump blocks the direction: pin it
            let blocker = (0..n).find(|&i| {
                !pinned[i] && rates[i] != 0.0 && risk.jump_at(r[i], kink_tol).is_some() && {
                    let mut trial = pins.clone();
                    trial.push(Pin { obs: i, at: 0.0 });
                    rows_independent(&pinned_rows(data, &trial))
                }
            });
            if let Some(i) = blocker {
                let (at, _) = risk.jump_at(r[i], kink_tol).unwrap();
                pins.push(Pin { obs: i, at });
                project_onto_pins(data, &pins, &mut beta);
                q = risk.objective(&beta);
                continue;
            }
            if k == 0 {
                break;
            }
            // ψ values the pinned residuals would need: Aᵀφ = −n g
            let at = a.transpose();
            let phi = at
                .clone()
                .svd(true, true)
                .solve(&(-&g * n as f64), 1e-14)
                .map_err(|e| ShapeError::Numerical(e.to_string()))?;
            let mut worst = (0.0, None);
            for (idx, pin) in pins.iter().enumerate() {
                let hi = risk.loss.psi_left(pin.at);
                let lo = risk.loss.psi(pin.at);
                let viol = (phi[idx] - hi).max(lo - phi[idx]);
                if viol > worst.0 {
                    worst = (viol, Some(idx));
                }
            }
            match worst.1 {
                Some(idx) => {
                    pins.remove(idx);
                    continue;
                }
                None => break,
            }
        }
        // exact line search on the piecewise-quadratic restriction
        let mut s_hi = 1.0;
        let mut guard = 0;
        while risk.slope_along(&r, &rates, s_hi) < 0.0 {
            s_hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(ShapeError::Numerical("risk is unbounded along a direction".into()));
            }
        }
        let (mut lo, mut hi) = (0.0, s_hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if risk.slope_along(&r, &rates, mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut s = hi;
        // snap to the jump crossing that stops the search, and pin it
        let mut crossing: Option<(f64, usize, f64)> = None;
        for i in 0..n {
            if rates[i] == 0.0 {
                continue;
            }
            let at = r[i] - s * rates[i];
            if let Some((z, _)) = risk.jump_at(at, (hi - lo).max(1e-12 * s) * rates[i].abs() * 4.0 + 1e-15) {
                let si = (r[i] - z) / rates[i];
                let gap = (si - s).abs();
                if crossing.map_or(true, |c| gap < (c.0 - s).abs()) {
                    crossing = Some((si, i, z));
                }
            }
        }
        if let Some((si, obs, at)) = crossing {
            if si >= 0.0 {
                s = si;
                let mut trial = pins.clone();
                trial.push(Pin { obs, at });
                if rows_independent(&pinned_rows(data, &trial)) {
                    pins = trial;
                }
            }
        }
        let mut cand: Vec<f64> = beta.iter().zip(&p).map(|(b, v)| b + s * v).collect();
        project_onto_pins(data, &pins, &mut cand);
        let qc = risk.objective(&cand);
        if qc > q + 1e-12 * (1.0 + q.abs()) {
            break;
        }
        beta = cand;
        q = qc.min(q);
        if q <= best.1 {
            best = (beta.clone(), q);
        }
    }
    let r = data.residuals(&best.0);
    if risk.min_subgradient(&r, kink_tol) <= tol {
        return Ok((best.0, iterations));
    }
    Err(ShapeError::NonConvergence { iterations, objective: best.1, best: best.0 })
}
