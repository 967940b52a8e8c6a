use super::density::{Density, DistributionFunction};
use super::sample::SortedSample;
use crate::error::{invalid, Result};
use crate::quad::{integrate_abs_panels, integrate_panels, refine_panels};

/// Minimum number of quadrature panels for metric integrals.
pub const MIN_PANELS: usize = 4096;

/// Allowed deviation of a density's total mass from one.
pub const NORMALIZATION_TOL: f64 = 1e-6;

fn union_panels(lo: f64, hi: f64, a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    let mut breaks = a;
    breaks.extend(b);
    refine_panels(lo, hi, &breaks, MIN_PANELS)
}

fn density_panels<P, Q>(p: &P, q: &Q) -> Result<Vec<f64>>
where
    P: Density + ?Sized,
    Q: Density + ?Sized,
{
    let (pl, ph) = p.support();
    let (ql, qh) = q.support();
    let (lo, hi) = (pl.min(ql), ph.max(qh));
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return invalid("densities need a finite, non-empty support");
    }
    let mut pb = Density::breakpoints(p);
    pb.extend([pl, ph]);
    let mut qb = Density::breakpoints(q);
    qb.extend([ql, qh]);
    let panels = union_panels(lo, hi, pb, qb);
    for (name, mass) in [
        ("first", integrate_panels(&|x| p.pdf(x), &panels)),
        ("second", integrate_panels(&|x| q.pdf(x), &panels)),
    ] {
        if (mass - 1.0).abs() > NORMALIZATION_TOL {
            return invalid(format!("{name} density integrates to {mass}"));
        }
    }
    Ok(panels)
}

/// Total variation distance `½∫|p − q|`.
pub fn tv<P, Q>(p: &P, q: &Q) -> Result<f64>
where
    P: Density + ?Sized,
    Q: Density + ?Sized,
{
    let panels = density_panels(p, q)?;
    let v = 0.5 * integrate_abs_panels(&|x| p.pdf(x) - q.pdf(x), &panels);
    Ok(v.clamp(0.0, 1.0))
}

/// Squared Hellinger distance `∫(√p − √q)²`, which lies in `[0, 2]`.
pub fn hellinger_sq<P, Q>(p: &P, q: &Q) -> Result<f64>
where
    P: Density + ?Sized,
    Q: Density + ?Sized,
{
    let panels = density_panels(p, q)?;
    let v = integrate_panels(
        &|x| {
            let d = p.pdf(x).max(0.0).sqrt() - q.pdf(x).max(0.0).sqrt();
            d * d
        },
        &panels,
    );
    Ok(v.clamp(0.0, 2.0))
}

/// Kullback–Leibler divergence `∫p log(p/q)`; `+∞` when `p` charges a region
/// where `q` vanishes.
pub fn kl<P, Q>(p: &P, q: &Q) -> Result<f64>
where
    P: Density + ?Sized,
    Q: Density + ?Sized,
{
    let panels = density_panels(p, q)?;
    let escaped = std::cell::Cell::new(false);
    let v = integrate_panels(
        &|x| {
            let (a, b) = (p.pdf(x), q.pdf(x));
            if a <= 0.0 {
                0.0
            } else if b <= 0.0 {
                escaped.set(true);
                0.0
            } else {
                a * (a / b).ln()
            }
        },
        &panels,
    );
    if escaped.get() {
        return Ok(f64::INFINITY);
    }
    Ok(v.max(0.0))
}

fn span_union<F, G>(f: &F, g: &G) -> Result<(f64, f64)>
where
    F: DistributionFunction + ?Sized,
    G: DistributionFunction + ?Sized,
{
    let (fl, fh) = f.span();
    let (gl, gh) = g.span();
    let (lo, hi) = (fl.min(gl), fh.max(gh));
    if !lo.is_finite() || !hi.is_finite() || lo > hi {
        return invalid("distribution functions need finite spans");
    }
    Ok((lo, hi))
}

/// One-dimensional Wasserstein-1 distance `∫|F − G|`.
pub fn wasserstein1<F, G>(f: &F, g: &G) -> Result<f64>
where
    F: DistributionFunction + ?Sized,
    G: DistributionFunction + ?Sized,
{
    let (lo, hi) = span_union(f, g)?;
    if lo == hi {
        return Ok(0.0);
    }
    let panels = union_panels(lo, hi, f.breakpoints(), g.breakpoints());
    Ok(integrate_abs_panels(&|x| f.value(x) - g.value(x), &panels))
}

/// Kolmogorov distance `sup |F − G|`, including left limits at jumps.
///
/// Exact when both inputs are piecewise linear between their breakpoints;
/// otherwise each gap between breakpoints is scanned and the best probe is
/// refined by golden-section search.
pub fn kolmogorov<F, G>(f: &F, g: &G) -> Result<f64>
where
    F: DistributionFunction + ?Sized,
    G: DistributionFunction + ?Sized,
{
    let (lo, hi) = span_union(f, g)?;
    let mut pts: Vec<f64> = f.breakpoints();
    pts.extend(g.breakpoints());
    pts.extend([lo, hi]);
    pts.retain(|x| x.is_finite() && *x >= lo && *x <= hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let diff = |x: f64| (f.value(x) - g.value(x)).abs();
    let mut best = 0.0f64;
    for &x in &pts {
        best = best
            .max(diff(x))
            .max((f.left_limit(x) - g.left_limit(x)).abs());
    }
    if f.is_piecewise_linear() && g.is_piecewise_linear() {
        return Ok(best);
    }
    // make sure smooth inputs with few breakpoints still get scanned densely
    if pts.len() < 512 && hi > lo {
        pts = refine_panels(lo, hi, &pts, 512);
    }
    const PROBES: usize = 32;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = (b - a) / (PROBES + 1) as f64;
        if h <= 0.0 {
            continue;
        }
        let mut arg = a + h;
        let mut top = diff(arg);
        for j in 2..=PROBES {
            let x = a + h * j as f64;
            let v = diff(x);
            if v > top {
                top = v;
                arg = x;
            }
        }
        best = best.max(golden_max(&diff, (arg - h).max(a), (arg + h).min(b), top));
    }
    Ok(best)
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, seed: f64) -> f64 {
    const R: f64 = 0.618_033_988_749_894_9;
    let mut c = b - R * (b - a);
    let mut d = a + R * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = seed.max(fc).max(fd);
    for _ in 0..80 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - R * (b - a);
            fc = f(c);
            best = best.max(fc);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + R * (b - a);
            fd = f(d);
            best = best.max(fd);
        }
    }
    best
}

/// Mean absolute deviation about the mean, flagged when the input is a point
/// mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonP {
    pub value: f64,
    pub degenerate: bool,
}

/// `E|X − EX|` under the empirical measure.
pub fn epsilon_p(sample: &SortedSample) -> EpsilonP {
    let m = sample.mean();
    let n = sample.n() as f64;
    let value = sample
        .values()
        .iter()
        .zip(sample.weights())
        .map(|(x, w)| w * (x - m).abs())
        .sum::<f64>()
        / n;
    EpsilonP {
        value,
        degenerate: sample.distinct() == 1,
    }
}

/// `E|X − EX|` for a density, by panel quadrature split at the mean.
pub fn epsilon_p_density<P: Density + ?Sized>(p: &P) -> Result<EpsilonP> {
    let (lo, hi) = p.support();
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return invalid("density needs a finite, non-empty support");
    }
    let mut breaks = Density::breakpoints(p);
    let panels = refine_panels(lo, hi, &breaks, MIN_PANELS);
    let mass = integrate_panels(&|x| p.pdf(x), &panels);
    if (mass - 1.0).abs() > NORMALIZATION_TOL {
        return invalid(format!("density integrates to {mass}"));
    }
    let mean = integrate_panels(&|x| x * p.pdf(x), &panels);
    breaks.push(mean);
    let panels = refine_panels(lo, hi, &breaks, MIN_PANELS);
    let value = integrate_panels(&|x| (x - mean).abs() * p.pdf(x), &panels);
    Ok(EpsilonP {
        value,
        degenerate: value <= 0.0,
    })
}
