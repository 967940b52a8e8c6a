use serde::Serialize;

/// Aggregate of one metric at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskRow {
    pub n: usize,
    pub metric: String,
    pub mean: f64,
    pub median: f64,
    pub std_error: f64,
    /// Mean multiplied by the metric's rate normalization, e.g. `n^{1/3}·TV`.
    pub scaled: f64,
}

/// Least-squares fit of `log mean` on `log n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogSlope {
    pub slope: f64,
    pub std_error: f64,
    pub points: usize,
}

/// Rows sorted by `n` (stable within a sample size).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RiskTable {
    rows: Vec<RiskRow>,
}

impl RiskRow {
    /// Summarizes replicate values; `scale` multiplies the mean.
    pub fn from_values(n: usize, metric: &str, values: &[f64], scale: f64) -> Self {
        let k = values.len();
        let mean = values.iter().sum::<f64>() / k as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if k % 2 == 1 {
            sorted[k / 2]
        } else {
            0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
        };
        let std_error = if k > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        } else {
            0.0
        };
        Self { n, metric: metric.to_string(), mean, median, std_error, scaled: scale * mean }
    }

    /// A single deterministic value.
    pub fn exact(n: usize, metric: &str, value: f64) -> Self {
        Self::from_values(n, metric, &[value], 1.0)
    }
}

impl RiskTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: RiskRow) {
        let at = self.rows.partition_point(|r| r.n <= row.n);
        self.rows.insert(at, row);
    }

    pub fn rows(&self) -> &[RiskRow] {
        &self.rows
    }

    /// Metric names in order of first appearance.
    pub fn metrics(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for r in &self.rows {
            if !names.contains(&r.metric) {
                names.push(r.metric.clone());
            }
        }
        names
    }

    pub fn metric_rows(&self, metric: &str) -> Vec<&RiskRow> {
        self.rows.iter().filter(|r| r.metric == metric).collect()
    }

    pub fn row(&self, n: usize, metric: &str) -> Option<&RiskRow> {
        self.rows.iter().find(|r| r.n == n && r.metric == metric)
    }

    /// Slope of `log mean` against `log n` for `metric`; needs at least three
    /// sample sizes with positive mean.
    pub fn slope(&self, metric: &str) -> Option<LogLogSlope> {
        let pts: Vec<(f64, f64)> = self
            .metric_rows(metric)
            .into_iter()
            .filter(|r| r.mean > 0.0 && r.n > 0)
            .map(|r| ((r.n as f64).ln(), r.mean.ln()))
            .collect();
        log_log_fit(&pts)
    }
}

fn log_log_fit(pts: &[(f64, f64)]) -> Option<LogLogSlope> {
    let k = pts.len();
    if k < 3 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let std_error = (rss / (k - 2) as f64 / sxx).sqrt();
    Some(LogLogSlope { slope, std_error, points: k })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_statistics() {
        let r = RiskRow::from_values(10, "tv", &[1.0, 2.0, 4.0, 5.0], 2.0);
        assert_eq!(r.mean, 3.0);
        assert_eq!(r.median, 3.0);
        assert!((r.std_error - (10.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(r.scaled, 6.0);
    }

    #[test]
    fn exact_power_law_has_zero_slope_error() {
        let mut t = RiskTable::new();
        for n in [400usize, 100, 1600] {
            t.push(RiskRow::exact(n, "tv", 3.0 * (n as f64).powf(-1.0 / 3.0)));
        }
        assert!(t.rows().windows(2).all(|w| w[0].n <= w[1].n));
        let s = t.slope("tv").unwrap();
        assert!((s.slope + 1.0 / 3.0).abs() < 1e-12);
        assert!(s.std_error < 1e-7);
        assert!(t.slope("missing").is_none());
    }

    #[test]
    fn two_points_give_no_slope() {
        let mut t = RiskTable::new();
        t.push(RiskRow::exact(1, "a", 1.0));
        t.push(RiskRow::exact(2, "a", 0.5));
        assert!(t.slope("a").is_none());
    }
}
