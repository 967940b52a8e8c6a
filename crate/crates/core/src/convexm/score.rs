use serde::{Serialize, Serializer};

use super::model::DensityModel;
use crate::error::{invalid, Result, ShapeError};
use crate::shape::{least_concave_majorant, PlanarPoints};

/// Size of the uniform grid on `[0, 1]` carrying `J₀` and its majorant.
pub const SCORE_GRID: usize = (1 << 16) + 1;

/// Density quantile function `J₀ = f₀ ∘ F₀⁻¹` sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileDensity {
    pub u: Vec<f64>,
    pub j: Vec<f64>,
}

/// Samples `J₀` on `m` equally spaced points of `[0, 1]`. End values are the
/// density limits at the ends of the support, hence zero for unbounded
/// supports.
pub fn density_quantile(model: &DensityModel, m: usize) -> Result<QuantileDensity> {
    if m < 16 {
        return invalid("density quantile grid needs at least 16 points");
    }
    let (lo_end, hi_end) = model.boundary_density();
    let step = 1.0 / (m - 1) as f64;
    let mut u = Vec::with_capacity(m);
    let mut j = Vec::with_capacity(m);
    for i in 0..m {
        let ui = if i == m - 1 { 1.0 } else { i as f64 * step };
        let ji = if i == 0 {
            lo_end
        } else if i == m - 1 {
            hi_end
        } else {
            model.pdf(model.quantile(ui))
        };
        if !ji.is_finite() || ji < 0.0 {
            return Err(ShapeError::Numerical(format!("J₀({ui}) = {ji}")));
        }
        u.push(ui);
        j.push(ji);
    }
    Ok(QuantileDensity { u, j })
}

/// Decreasing right-continuous score `ψ = Ĵ^(R) ∘ F`, stored through the knots
/// of the concave majorant `Ĵ` and the matching points `z = F⁻¹(u)`.
///
/// Outside the support the score is `+∞` on the left and `−∞` on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFn {
    ugrid: Vec<f64>,
    slopes: Vec<f64>,
    jvals: Vec<f64>,
    zknots: Vec<f64>,
    /// Location of the middle of each segment, for segments spanning a
    /// single cell of the input grid; NaN otherwise.
    zmid: Vec<f64>,
    support: (f64, f64),
}

impl Serialize for ScoreFn {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            ugrid: &'a [f64],
            slopes: &'a [f64],
        }
        Wire { ugrid: &self.ugrid, slopes: &self.slopes }.serialize(s)
    }
}

impl ScoreFn {
    /// Builds the score from parametric points `(u_i, J_i)` with locations
    /// `z_i = F⁻¹(u_i)`. `u` must be strictly increasing from 0 to 1;
    /// `mid(i)` locates the middle of cell `[u_i, u_{i+1}]`.
    pub(crate) fn from_points(
        u: &[f64],
        j: &[f64],
        z: &[f64],
        mid: &dyn Fn(usize) -> f64,
        support: (f64, f64),
    ) -> Result<Self> {
        if u.len() != j.len() || u.len() != z.len() || u.len() < 2 {
            return invalid("score points need matching lengths ≥ 2");
        }
        if u.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("u grid must be strictly increasing");
        }
        if j.iter().all(|&v| v <= 0.0) {
            return Err(ShapeError::Degenerate("density quantile function vanishes".into()));
        }
        let hull = least_concave_majorant(&PlanarPoints::new(u.to_vec(), j.to_vec())?)?;
        let ugrid = hull.knots().to_vec();
        let jvals = hull.vals().to_vec();
        let slopes = hull.slopes();
        let idx: Vec<usize> = ugrid.iter().map(|&k| u.partition_point(|&v| v < k)).collect();
        let zknots: Vec<f64> = idx.iter().map(|&i| z[i]).collect();
        let zmid = idx
            .windows(2)
            .map(|w| if w[1] == w[0] + 1 { mid(w[0]) } else { f64::NAN })
            .collect();
        Ok(Self { ugrid, slopes, jvals, zknots, zmid, support })
    }

    pub fn ugrid(&self) -> &[f64] {
        &self.ugrid
    }

    /// Right derivatives of `Ĵ` on each knot interval; nonincreasing.
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Values of `Ĵ` at the knots.
    pub fn majorant_values(&self) -> &[f64] {
        &self.jvals
    }

    /// Jump locations `F⁻¹(u_k)`; the ends may be infinite.
    pub fn zknots(&self) -> &[f64] {
        &self.zknots
    }

    /// Endpoints of the support outside of which the score is infinite.
    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// True when the score is `+∞` somewhere to the left of the support.
    pub fn lower_infinite(&self) -> bool {
        self.support.0.is_finite()
    }

    /// True when the score is `−∞` from the right end of the support on.
    pub fn upper_infinite(&self) -> bool {
        self.support.1.is_finite()
    }

    fn segment(&self, z: f64) -> usize {
        let k = self.zknots.partition_point(|&v| v <= z);
        k.saturating_sub(1).min(self.slopes.len() - 1)
    }

    /// Right-continuous evaluation; infinite outside the support.
    pub fn eval(&self, z: f64) -> f64 {
        if z < self.support.0 {
            return f64::INFINITY;
        }
        if z >= self.support.1 {
            return f64::NEG_INFINITY;
        }
        self.slopes[self.segment(z)]
    }

    /// Largest finite absolute slope.
    pub fn max_abs_slope(&self) -> f64 {
        self.slopes.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Like [`eval`](Self::eval) with the infinite values clipped to
    /// `±max_abs_slope`.
    pub fn eval_clipped(&self, z: f64) -> f64 {
        let v = self.eval(z);
        v.clamp(-self.max_abs_slope(), self.max_abs_slope())
    }

    /// `∫ψ² dP` for the measure the score was built from.
    pub fn information(&self) -> f64 {
        self.slopes
            .iter()
            .zip(self.ugrid.windows(2))
            .map(|(s, w)| s * s * (w[1] - w[0]))
            .sum()
    }

    /// `∫ψ dP` for the measure the score was built from.
    pub fn mean(&self) -> f64 {
        self.slopes
            .iter()
            .zip(self.ugrid.windows(2))
            .map(|(s, w)| s * (w[1] - w[0]))
            .sum()
    }

    /// Continuous piecewise-linear version for building losses: runs of
    /// single-cell segments are interpolated through their midpoints, longer
    /// flat segments are kept flat, and the jump between adjacent flats is
    /// kept. Values outside a bounded support are clipped.
    pub fn to_pl(&self) -> PlScore {
        let mut nodes: Vec<(f64, f64, f64)> = Vec::new();
        let push = |z: f64, left: f64, right: f64, nodes: &mut Vec<(f64, f64, f64)>| {
            if !z.is_finite() {
                return;
            }
            match nodes.last_mut() {
                Some(last) if last.0 >= z => last.2 = right,
                _ => nodes.push((z, left, right)),
            }
        };
        let clip = self.max_abs_slope();
        if self.support.0.is_finite() {
            push(self.support.0, clip.max(self.slopes[0]), self.slopes[0], &mut nodes);
        }
        for (k, &s) in self.slopes.iter().enumerate() {
            if self.zmid[k].is_finite() {
                push(self.zmid[k], s, s, &mut nodes);
            } else {
                push(self.zknots[k], s, s, &mut nodes);
                push(self.zknots[k + 1], s, s, &mut nodes);
            }
        }
        let last = *self.slopes.last().unwrap();
        if self.support.1.is_finite() {
            push(self.support.1, last, (-clip).min(last), &mut nodes);
        }
        if nodes.is_empty() {
            nodes.push((0.0, self.slopes[0], self.slopes[0]));
        }
        PlScore::from_nodes(nodes, 0.0, 0.0)
    }
}

/// Antitonic projection `ψ₀* = Ĵ₀^(R) ∘ F₀` of the location score of `model`,
/// computed on a grid of [`SCORE_GRID`] points.
pub fn antitonic_score(model: &DensityModel) -> Result<ScoreFn> {
    antitonic_score_on_grid(model, SCORE_GRID)
}

/// [`antitonic_score`] with an explicit grid size.
pub fn antitonic_score_on_grid(model: &DensityModel, m: usize) -> Result<ScoreFn> {
    let qd = density_quantile(model, m)?;
    let z: Vec<f64> = qd.u.iter().map(|&u| model.quantile(u)).collect();
    if z[1..m - 1].iter().any(|v| !v.is_finite()) {
        return Err(ShapeError::Numerical("quantile function is not finite inside (0, 1)".into()));
    }
    let step = 1.0 / (m - 1) as f64;
    let mid = |i: usize| model.quantile((i as f64 + 0.5) * step);
    ScoreFn::from_points(&qd.u, &qd.j, &z, &mid, model.support_bounds())
}

/// Decreasing score that is linear between nodes and may jump down at a node.
///
/// At node `z_i` the limit from the left is `left_i` and the value (limit from
/// the right) is `right_i`. Beyond the outer nodes the score continues
/// linearly with the given tail slopes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlScore {
    z: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
    left_slope: f64,
    right_slope: f64,
}

/// Slack allowed on monotonicity checks of [`PlScore`] values.
const PL_MONOTONE_TOL: f64 = 1e-12;

impl PlScore {
    /// Validates that the described function is finite and nonincreasing.
    pub fn new(
        z: Vec<f64>,
        left: Vec<f64>,
        right: Vec<f64>,
        left_slope: f64,
        right_slope: f64,
    ) -> Result<Self> {
        if z.is_empty() || z.len() != left.len() || z.len() != right.len() {
            return invalid("score nodes need matching nonempty z, left, right");
        }
        if z.iter().chain(&left).chain(&right).any(|v| !v.is_finite()) {
            return invalid("score nodes must be finite");
        }
        if z.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("score nodes must be strictly increasing");
        }
        if !(left_slope <= 0.0 && right_slope <= 0.0) {
            return invalid("tail slopes must be nonpositive");
        }
        let scale = left.iter().chain(&right).fold(1.0f64, |m, v| m.max(v.abs()));
        let tol = PL_MONOTONE_TOL * scale;
        for i in 0..z.len() {
            if right[i] > left[i] + tol {
                return invalid(format!("score jumps upward at {}", z[i]));
            }
            if i + 1 < z.len() && left[i + 1] > right[i] + tol {
                return invalid(format!("score increases on [{}, {}]", z[i], z[i + 1]));
            }
        }
        Ok(Self { z, left, right, left_slope, right_slope })
    }

    fn from_nodes(nodes: Vec<(f64, f64, f64)>, left_slope: f64, right_slope: f64) -> Self {
        let (z, (left, right)): (Vec<f64>, (Vec<f64>, Vec<f64>)) =
            nodes.into_iter().map(|(z, l, r)| (z, (l, r))).unzip();
        Self { z, left, right, left_slope, right_slope }
    }

    /// `ψ(z) = slope·z`.
    pub fn linear(slope: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![0.0], vec![0.0], slope, slope)
    }

    /// `ψ(z) = −sgn(z)`, right-continuous so `ψ(0) = −1`.
    pub fn neg_sign() -> Self {
        Self::from_nodes(vec![(0.0, 1.0, -1.0)], 0.0, 0.0)
    }

    /// Huber score `−clamp(z, −k, k)`.
    pub fn huber(k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return invalid("Huber threshold must be positive");
        }
        Self::new(vec![-k, k], vec![k, -k], vec![k, -k], 0.0, 0.0)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.z
    }

    pub fn left_values(&self) -> &[f64] {
        &self.left
    }

    pub fn right_values(&self) -> &[f64] {
        &self.right
    }

    pub fn tail_slopes(&self) -> (f64, f64) {
        (self.left_slope, self.right_slope)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return invalid("score scale must be positive");
        }
        Ok(Self {
            z: self.z.clone(),
            left: self.left.iter().map(|v| c * v).collect(),
            right: self.right.iter().map(|v| c * v).collect(),
            left_slope: c * self.left_slope,
            right_slope: c * self.right_slope,
        })
    }

    /// Index of the last node `≤ x`, or `None` left of the first node.
    pub(crate) fn piece(&self, x: f64) -> Option<usize> {
        self.z.partition_point(|&v| v <= x).checked_sub(1)
    }

    /// Slope of the linear part on the piece starting at node `i` (the right
    /// tail for the last node).
    pub(crate) fn piece_slope(&self, i: usize) -> f64 {
        if i + 1 == self.z.len() {
            self.right_slope
        } else {
            (self.left[i + 1] - self.right[i]) / (self.z[i + 1] - self.z[i])
        }
    }

    /// Right-continuous value.
    pub fn eval(&self, x: f64) -> f64 {
        match self.piece(x) {
            None => self.left[0] + self.left_slope * (x - self.z[0]),
            Some(i) => self.right[i] + self.piece_slope(i) * (x - self.z[i]),
        }
    }

    /// Limit from the left.
    pub fn eval_left(&self, x: f64) -> f64 {
        match self.z.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => self.left[i],
            Err(_) => self.eval(x),
        }
    }

    /// Slope of the absolutely continuous part at `x` (right-continuous).
    pub fn slope_at(&self, x: f64) -> f64 {
        match self.piece(x) {
            None => self.left_slope,
            Some(i) => self.piece_slope(i),
        }
    }

    /// Downward jumps `(z_i, left_i − right_i)` with positive size.
    pub fn jumps(&self) -> Vec<(f64, f64)> {
        self.z
            .iter()
            .zip(self.left.iter().zip(&self.right))
            .filter(|(_, (l, r))| *l > *r)
            .map(|(&z, (l, r))| (z, l - r))
            .collect()
    }

    pub fn has_jumps(&self) -> bool {
        self.left.iter().zip(&self.right).any(|(l, r)| l > r)
    }

    /// `∫_{z_0}^{x} ψ`.
    pub(crate) fn primitive_from_first(&self, x: f64, cum: &[f64]) -> f64 {
        match self.piece(x) {
            None => {
                let d = x - self.z[0];
                self.left[0] * d + 0.5 * self.left_slope * d * d
            }
            Some(i) => {
                let d = x - self.z[i];
                cum[i] + self.right[i] * d + 0.5 * self.piece_slope(i) * d * d
            }
        }
    }

    /// `∫_{z_0}^{z_i} ψ` at every node.
    pub(crate) fn node_primitives(&self) -> Vec<f64> {
        let mut cum = Vec::with_capacity(self.z.len());
        cum.push(0.0);
        for i in 0..self.z.len() - 1 {
            let w = self.z[i + 1] - self.z[i];
            cum.push(cum[i] + 0.5 * (self.right[i] + self.left[i + 1]) * w);
        }
        cum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cauchy_density_quantile_closed_form() {
        let qd = density_quantile(&DensityModel::Cauchy, 1 << 14).unwrap();
        let err = qd
            .u
            .iter()
            .zip(&qd.j)
            .map(|(u, j)| (j - (PI * u).sin().powi(2) / PI).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "sup error {err}");
    }

    #[test]
    fn uniform_density_quantile_is_flat() {
        let g = crate::shape::GridDensity::new(vec![0.0, 0.5, 1.0], vec![1.0; 3]).unwrap();
        let qd = density_quantile(&DensityModel::grid(g), 33).unwrap();
        assert!(qd.j.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn gaussian_density_quantile_is_concave() {
        let qd = density_quantile(&DensityModel::Gaussian, 1025).unwrap();
        assert!(qd.j.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] <= 1e-15));
        let top = qd.j[512];
        assert!((top - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert!(qd.j.iter().all(|&v| v <= top));
    }

    #[test]
    fn small_grid_rejected() {
        assert!(density_quantile(&DensityModel::Gaussian, 15).is_err());
    }

    #[test]
    fn gaussian_score_is_identity_projection() {
        let psi = antitonic_score(&DensityModel::Gaussian).unwrap();
        let lim = crate::convexm::model::std_normal_quantile(0.995);
        let mut worst: f64 = 0.0;
        for i in 0..=2000 {
            let z = -lim + 2.0 * lim * i as f64 / 2000.0;
            worst = worst.max((psi.eval(z) + z).abs());
        }
        assert!(worst < 2e-3, "sup error {worst}");
    }

    #[test]
    fn laplace_score_is_negative_sign() {
        let psi = antitonic_score(&DensityModel::Laplace).unwrap();
        for &z in &[-4.0, -1.0, -1e-6, 1e-6, 0.5, 4.0] {
            assert!((psi.eval(z) + f64::signum(z)).abs() < 1e-9, "z={z}");
        }
        assert!((psi.eval(0.0) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn cauchy_score_flat_tails_and_central_agreement() {
        let psi = antitonic_score(&DensityModel::Cauchy).unwrap();
        let s = psi.slopes();
        // flat tail segments span many grid cells
        let first = psi.ugrid()[1];
        assert!(first > 0.05, "first knot {first}");
        assert!((psi.eval(-1e6) - s[0]).abs() == 0.0);
        for &z in &[-0.4, -0.3, 0.0, 0.2, 0.4] {
            let exact = -2.0 * z / (1.0 + z * z);
            assert!((psi.eval(z) - exact).abs() < 2e-3, "z={z}");
        }
        assert!(s.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bounded_support_flags_infinite_ends() {
        let g = crate::shape::GridDensity::new(vec![0.0, 0.5, 1.0], vec![1.0; 3]).unwrap();
        let psi = antitonic_score_on_grid(&DensityModel::grid(g), 257).unwrap();
        assert!(psi.lower_infinite() && psi.upper_infinite());
        assert_eq!(psi.eval(-0.1), f64::INFINITY);
        assert_eq!(psi.eval(1.0), f64::NEG_INFINITY);
        assert!(psi.eval(0.5).abs() < 1e-12);
    }

    #[test]
    fn pl_score_evaluation() {
        let s = PlScore::neg_sign();
        assert_eq!(s.eval(0.0), -1.0);
        assert_eq!(s.eval_left(0.0), 1.0);
        assert_eq!(s.eval(-3.0), 1.0);
        let g = PlScore::linear(-1.0).unwrap();
        assert_eq!(g.eval(2.5), -2.5);
        assert_eq!(g.eval(-2.5), 2.5);
        let h = PlScore::huber(1.345).unwrap();
        assert!((h.eval(0.5) + 0.5).abs() < 1e-15);
        assert_eq!(h.eval(3.0), -1.345);
        assert!(PlScore::new(vec![0.0], vec![-1.0], vec![1.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn pl_version_of_laplace_score_keeps_the_jump() {
        let psi = antitonic_score(&DensityModel::Laplace).unwrap().to_pl();
        let jumps = psi.jumps();
        assert_eq!(jumps.len(), 1);
        assert!(jumps[0].0.abs() < 1e-9 && (jumps[0].1 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn serializes_grid_and_slopes_only() {
        let psi = antitonic_score_on_grid(&DensityModel::Laplace, 65).unwrap();
        let v: serde_json::Value = serde_json::to_value(&psi).unwrap();
        let obj = v.as_object().unwrap();
        assert_eq!(obj.len(), 2);
        assert_eq!(obj["ugrid"].as_array().unwrap().len(), obj["slopes"].as_array().unwrap().len() + 1);
    }
}
