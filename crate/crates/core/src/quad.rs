//! Quadrature helpers: fixed Gauss–Legendre panels over known breakpoints and
//! an adaptive Gauss–Kronrod rule for smooth integrands.

const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Eight-point Gauss–Legendre rule on `[a, b]`. Never evaluates the endpoints.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
        s += w * (f(c - h * x) + f(c + h * x));
    }
    s * h
}

/// Panel boundaries covering `[lo, hi]` that include every breakpoint in
/// `breaks` and contain at least `min_panels` panels in total. Panels are
/// allotted to the gaps between breakpoints in proportion to their length.
pub fn refine_panels(lo: f64, hi: f64, breaks: &[f64], min_panels: usize) -> Vec<f64> {
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > lo && *b < hi)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let total = hi - lo;
    let mut out = Vec::with_capacity(pts.len() + min_panels);
    out.push(pts[0]);
    for w in pts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let k = ((min_panels as f64) * len / total).ceil().max(1.0) as usize;
        let step = len / k as f64;
        for j in 1..k {
            out.push(w[0] + step * j as f64);
        }
        out.push(w[1]);
    }
    out
}

/// Sum of Gauss–Legendre integrals over consecutive panel boundaries.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: &F, panels: &[f64]) -> f64 {
    panels
        .windows(2)
        .map(|w| gauss_legendre(f, w[0], w[1]))
        .sum()
}

/// `∫|f|` over the panels, splitting each panel at sign changes of `f` so the
/// kink of `|f|` never sits inside a quadrature panel.
pub fn integrate_abs_panels<F: Fn(f64) -> f64>(f: &F, panels: &[f64]) -> f64 {
    const PROBES: usize = 9;
    let mut total = 0.0;
    for w in panels.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = b - a;
        if h <= 0.0 {
            continue;
        }
        // probes stay strictly inside the panel: endpoints may be jump points
        let xs: Vec<f64> = (0..PROBES)
            .map(|j| {
                let t = (j as f64 + 0.5) / PROBES as f64;
                a + h * t
            })
            .collect();
        let vs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let mut cuts = vec![a];
        for j in 0..PROBES - 1 {
            if vs[j] * vs[j + 1] < 0.0 {
                cuts.push(bisect_root(f, xs[j], xs[j + 1], vs[j]));
            }
        }
        cuts.push(b);
        for c in cuts.windows(2) {
            total += gauss_legendre(&|x: f64| f(x).abs(), c[0], c[1]);
        }
    }
    total
}

fn bisect_root<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, flo: f64) -> f64 {
    let sign_lo = flo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid).signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        resk += WGK[j] * s;
        if j % 2 == 1 {
            resg += WG[j / 2] * s;
        }
    }
    (resk * h, ((resk - resg) * h).abs())
}

/// Most pieces [`adaptive`] will split an interval into.
const MAX_PIECES: usize = 1 << 13;

/// A piece of the interval keyed by its error estimate.
struct Piece {
    lo: f64,
    hi: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err).is_eq()
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive Gauss–Kronrod (7/15) quadrature on a finite interval.
///
/// Repeatedly bisects the piece with the largest Kronrod/Gauss discrepancy
/// until the summed discrepancy is below `max(abs_tol, rel_tol·|I|)`. The
/// number of pieces is capped, which bounds the work on integrands whose
/// evaluation noise sits above the requested tolerance.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let piece = |lo: f64, hi: f64| {
        let (val, err) = kronrod15(f, lo, hi);
        Piece { lo, hi, val, err }
    };
    let first = piece(a, b);
    let (mut total, mut err) = (first.val, first.err);
    let mut heap = std::collections::BinaryHeap::from(vec![first]);
    let mut done = Vec::new();
    while err > abs_tol.max(rel_tol * total.abs()) && heap.len() + done.len() < MAX_PIECES {
        let Some(p) = heap.pop() else { break };
        let mid = 0.5 * (p.lo + p.hi);
        if mid <= p.lo.min(p.hi) || mid >= p.lo.max(p.hi) {
            // cannot be split further in floating point
            err -= p.err;
            done.push(p);
            continue;
        }
        let (l, r) = (piece(p.lo, mid), piece(mid, p.hi));
        total += l.val + r.val - p.val;
        err += l.err + r.err - p.err;
        heap.push(l);
        heap.push(r);
    }
    // resum to shed the drift of the running update
    heap.iter().chain(&done).map(|p| p.val).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_low_degree() {
        let v = gauss_legendre(&|x: f64| x.powi(7) - 3.0 * x * x + 1.0, -1.0, 2.0);
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0) + 3.0;
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn abs_integral_splits_at_roots() {
        let panels = refine_panels(-1.0, 2.0, &[], 3);
        let v = integrate_abs_panels(&|x: f64| x - 0.3, &panels);
        let exact = 0.5 * 1.3 * 1.3 + 0.5 * 1.7 * 1.7;
        assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
    }

    #[test]
    fn adaptive_handles_peaky_integrand() {
        let v = adaptive(&|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12, 1e-12);
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v - exact).abs() / exact < 1e-10);
    }

    #[test]
    fn panels_respect_breakpoints() {
        let p = refine_panels(0.0, 1.0, &[0.25, 0.7, 3.0], 10);
        assert!(p.contains(&0.25) && p.contains(&0.7));
        assert!(p.len() >= 11);
        assert!(p.windows(2).all(|w| w[0] < w[1]));
    }
}
