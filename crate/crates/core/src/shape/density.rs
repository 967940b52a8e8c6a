use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, ShapeError};

/// A cdf-like function on the real line: nondecreasing with known
/// discontinuities or kinks.
pub trait DistributionFunction {
    /// Right-continuous value at `x`.
    fn value(&self, x: f64) -> f64;

    /// Limit from the left at `x`; equals [`value`](Self::value) for continuous
    /// functions.
    fn left_limit(&self, x: f64) -> f64 {
        self.value(x)
    }

    /// Points where the function may jump or change its functional form.
    fn breakpoints(&self) -> Vec<f64>;

    /// True when the function is linear (or constant) between consecutive
    /// breakpoints, so that extrema of differences sit at breakpoints.
    fn is_piecewise_linear(&self) -> bool {
        false
    }

    /// Interval outside which the function is constant (0 to the left, its
    /// final value to the right).
    fn span(&self) -> (f64, f64);
}

/// A probability density with an explicit distribution function.
pub trait Density: Sync {
    fn pdf(&self, x: f64) -> f64;

    fn cdf(&self, x: f64) -> f64;

    /// Finite interval carrying all but a negligible part of the mass; the
    /// metric integrals run over the union of both supports.
    fn support(&self) -> (f64, f64);

    /// Points where the density is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<D: Density + ?Sized> DistributionFunction for D {
    fn value(&self, x: f64) -> f64 {
        self.cdf(x)
    }

    fn breakpoints(&self) -> Vec<f64> {
        Density::breakpoints(self)
    }

    fn span(&self) -> (f64, f64) {
        self.support()
    }
}

/// Density tabulated on a uniform grid and linearly interpolated between grid
/// points; the distribution function is the exact integral of the interpolant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    grid: Vec<f64>,
    density: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridDensity {
    /// Validates a tabulated density whose trapezoid integral is already one
    /// within `1e-6`.
    pub fn new(grid: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != density.len() {
            return invalid("grid density needs ≥ 2 points and matching values");
        }
        if grid.iter().chain(&density).any(|v| !v.is_finite()) {
            return invalid("grid and density must be finite");
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("grid must be strictly increasing");
        }
        let h = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
        if grid
            .windows(2)
            .any(|w| ((w[1] - w[0]) - h).abs() > 1e-6 * h.max(f64::MIN_POSITIVE))
        {
            return invalid("grid must be uniform");
        }
        if density.iter().any(|&d| d < 0.0) {
            return invalid("density must be nonnegative");
        }
        let mut cdf = Vec::with_capacity(grid.len());
        cdf.push(0.0);
        let mut acc = 0.0;
        for i in 1..grid.len() {
            acc += 0.5 * (density[i - 1] + density[i]) * (grid[i] - grid[i - 1]);
            cdf.push(acc);
        }
        if (acc - 1.0).abs() > 1e-6 {
            return invalid(format!("density integrates to {acc}, not 1"));
        }
        Ok(Self { grid, density, cdf })
    }

    /// Tabulates `f` on `m` uniform points of `[lo, hi]` and rescales it to
    /// integrate to one.
    pub fn from_fn(lo: f64, hi: f64, m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if !(lo < hi) || m < 2 {
            return invalid("grid needs lo < hi and at least 2 points");
        }
        let h = (hi - lo) / (m - 1) as f64;
        let grid: Vec<f64> = (0..m)
            .map(|i| if i + 1 == m { hi } else { lo + h * i as f64 })
            .collect();
        let raw: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
        if raw.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return invalid("density function must be finite and nonnegative on the grid");
        }
        let total: f64 = raw.windows(2).map(|w| 0.5 * (w[0] + w[1]) * h).sum();
        if !(total > 0.0) {
            return Err(ShapeError::Degenerate("density has zero mass on the grid".into()));
        }
        Self::new(grid, raw.into_iter().map(|v| v / total).collect())
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    pub fn step(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    fn cell(&self, x: f64) -> usize {
        let last = self.grid.len() - 2;
        (((x - self.grid[0]) / self.step()).floor().max(0.0) as usize).min(last)
    }

    /// Generalized inverse `inf{x : F(x) ≥ u}` for `u ∈ [0, 1]`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(ShapeError::Domain(format!("quantile level {u} outside [0, 1]")));
        }
        let total = *self.cdf.last().unwrap();
        let target = u * total;
        let i = self.cdf.partition_point(|&c| c < target);
        if i == 0 {
            return Ok(self.grid[0]);
        }
        if i >= self.cdf.len() {
            return Ok(*self.grid.last().unwrap());
        }
        // F is quadratic on [grid[i-1], grid[i]]: F0 + d0 t + (d1 - d0) t²/(2h)
        let j = i - 1;
        let h = self.grid[i] - self.grid[j];
        let (d0, d1) = (self.density[j], self.density[i]);
        let r = target - self.cdf[j];
        let a = 0.5 * (d1 - d0) / h;
        let t = if a.abs() < 1e-300 || (a * r).abs() < 1e-14 * d0 * d0 {
            if d0 > 0.0 {
                r / d0
            } else {
                0.0
            }
        } else {
            let disc = (d0 * d0 + 4.0 * a * r).max(0.0);
            // numerically stable root of a t² + d0 t − r = 0
            2.0 * r / (d0 + disc.sqrt())
        };
        Ok(self.grid[j] + t.clamp(0.0, h))
    }
}

impl Density for GridDensity {
    fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = (self.grid[0], *self.grid.last().unwrap());
        if !(x >= lo && x <= hi) {
            return 0.0;
        }
        let j = self.cell(x);
        let t = ((x - self.grid[j]) / (self.grid[j + 1] - self.grid[j])).clamp(0.0, 1.0);
        self.density[j] + t * (self.density[j + 1] - self.density[j])
    }

    fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = (self.grid[0], *self.grid.last().unwrap());
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return *self.cdf.last().unwrap();
        }
        let j = self.cell(x);
        let h = self.grid[j + 1] - self.grid[j];
        let t = (x - self.grid[j]).clamp(0.0, h);
        let (d0, d1) = (self.density[j], self.density[j + 1]);
        self.cdf[j] + d0 * t + 0.5 * (d1 - d0) * t * t / h
    }

    fn support(&self) -> (f64, f64) {
        (self.grid[0], *self.grid.last().unwrap())
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.grid.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid() {
        let g = GridDensity::from_fn(0.0, 2.0, 101, |_| 1.0).unwrap();
        assert!((g.pdf(1.3) - 0.5).abs() < 1e-14);
        assert!((g.cdf(1.5) - 0.75).abs() < 1e-14);
        assert!((g.quantile(0.25).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(g.pdf(2.5), 0.0);
    }

    #[test]
    fn quantile_inverts_cdf_on_triangle() {
        let g = GridDensity::from_fn(0.0, 1.0, 11, |x| 2.0 * x).unwrap();
        for u in [0.01, 0.2, 0.5, 0.77, 0.99] {
            let x = g.quantile(u).unwrap();
            assert!((g.cdf(x) - u).abs() < 1e-12);
            assert!((x - u.sqrt()).abs() < 1e-12);
        }
        assert_eq!(g.quantile(0.0).unwrap(), 0.0);
        assert!(g.quantile(1.5).is_err());
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(GridDensity::new(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(GridDensity::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_ok());
        assert!(GridDensity::new(vec![0.0, 1.0, 3.0], vec![0.5, 0.5, 0.0]).is_err());
    }
}
