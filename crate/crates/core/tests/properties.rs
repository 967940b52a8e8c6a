//! Randomized invariants across the estimators, metrics and harness.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shapecon::convexm::{
    antitonic_score, fisher_info, istar, m_estimate, score_matching_min, variance_factor,
    ConvexLoss, DensityModel, LinearModelData, MixtureComponent, PlScore,
};
use shapecon::grenander::{grenander_fit, grenander_loglik, StepDensity};
use shapecon::harness::{run_experiment, write_artifacts, Distribution, ExperimentConfig, ExperimentId};
use shapecon::logconcave::logconcave_mle;
use shapecon::shape::{
    cumulative_diagram, hellinger_sq, kl, kolmogorov, least_concave_majorant, pava_antitonic, tv, wasserstein1, Density,
    PlanarPoints, SortedSample,
};

fn sample(dist: &Distribution, n: usize, seed: u64) -> SortedSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SortedSample::new(&dist.sample(n, &mut rng).unwrap()).unwrap()
}

fn decreasing_truth() -> impl Strategy<Value = Distribution> {
    prop_oneof![
        (0.2f64..5.0).prop_map(|rate| Distribution::Exp { rate }),
        (0.5f64..3.0).prop_map(|hi| Distribution::Uniform { lo: 0.0, hi }),
        (1.0f64..10.0, 0.5f64..3.0).prop_map(|(hl, l)| Distribution::TruncatedDecreasing { h: hl / l, l }),
        (0.2f64..5.0, 0.5f64..4.0).prop_map(|(rate, upper)| Distribution::TruncatedExp { rate, upper }),
    ]
}

fn real_line_law() -> impl Strategy<Value = Distribution> {
    prop_oneof![
        (-1.0f64..1.0, 0.2f64..2.0).prop_map(|(mean, sd)| Distribution::Gaussian { mean, sd }),
        (-1.0f64..1.0, 0.2f64..2.0).prop_map(|(loc, scale)| Distribution::Laplace { loc, scale }),
        (-2.0f64..1.0, 0.5f64..4.0).prop_map(|(lo, w)| Distribution::Uniform { lo, hi: lo + w }),
        (0.3f64..3.0).prop_map(|rate| Distribution::Exp { rate }),
        (0.0f64..2.0).prop_map(|m| Distribution::GaussianMixture {
            components: vec![
                MixtureComponent { weight: 0.5, mean: -1.5, sd: 0.5 },
                MixtureComponent { weight: 0.5, mean: m, sd: 0.5 },
            ],
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn grenander_cdf_is_a_contraction(truth in decreasing_truth(), law in decreasing_truth(), n in 2usize..300, seed: u64) {
        let x = sample(&law, n, seed);
        let fit = grenander_fit(&x).unwrap();
        let lhs = kolmogorov(&fit, &truth).unwrap();
        let rhs = kolmogorov(&x.ecdf(), &truth).unwrap();
        prop_assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
    }

    #[test]
    fn grenander_maximizes_the_likelihood(n in 3usize..60, seed: u64, cuts in proptest::collection::vec(0.0f64..1.0, 1..6), drops in proptest::collection::vec(0.0f64..1.0, 6)) {
        let x = sample(&Distribution::Exp { rate: 1.0 }, n, seed);
        let best = grenander_loglik(&grenander_fit(&x).unwrap(), &x);
        // competitor: decreasing steps ending at the sample maximum
        let top = x.max();
        let mut b: Vec<f64> = cuts.iter().map(|c| top * (0.05 + 0.9 * c)).collect();
        b.push(top);
        b.sort_by(f64::total_cmp);
        b.dedup();
        let mut levels = Vec::new();
        let mut level = 1.0;
        for d in drops.iter().take(b.len()) {
            levels.push(level);
            level *= 1.0 - 0.9 * d;
        }
        let mut prev = 0.0;
        let mass: f64 = b.iter().zip(&levels).map(|(&bk, l)| { let m = l * (bk - prev); prev = bk; m }).sum();
        let levels: Vec<f64> = levels.iter().map(|l| l / mass).collect();
        let alt = StepDensity::new(b, levels).unwrap();
        prop_assert!(best >= grenander_loglik(&alt, &x) - 1e-12);
    }

    #[test]
    fn majorant_is_idempotent_and_concave(pts in proptest::collection::vec((0.0f64..10.0, -5.0f64..5.0), 2..50)) {
        let mut pts = pts;
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        prop_assume!(x[0] < x[x.len() - 1]);
        let m = least_concave_majorant(&PlanarPoints::new(x.clone(), y.clone()).unwrap()).unwrap();
        prop_assert!(m.is_concave());
        for (&t, &v) in x.iter().zip(&y) {
            prop_assert!(m.eval(t).unwrap() >= v - 1e-12);
        }
        let again = least_concave_majorant(&PlanarPoints::new(m.knots().to_vec(), m.vals().to_vec()).unwrap()).unwrap();
        for &t in &x {
            prop_assert!((again.eval(t).unwrap() - m.eval(t).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn metric_axioms(p in real_line_law(), q in real_line_law(), r in real_line_law()) {
        let (pq, qp) = (tv(&p, &q).unwrap(), tv(&q, &p).unwrap());
        prop_assert!((pq - qp).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&pq));
        prop_assert!(tv(&p, &p).unwrap() < 1e-12);
        prop_assert!(pq <= tv(&p, &r).unwrap() + tv(&r, &q).unwrap() + 1e-9);
        let h = |a: &Distribution, b: &Distribution| hellinger_sq(a, b).unwrap();
        prop_assert!((h(&p, &q) - h(&q, &p)).abs() < 1e-12);
        prop_assert!(h(&p, &p) < 1e-12);
        prop_assert!(h(&p, &q).sqrt() <= h(&p, &r).sqrt() + h(&r, &q).sqrt() + 1e-9);
        // H² ≤ 2 TV ≤ 2 H
        prop_assert!(h(&p, &q) <= 2.0 * pq + 1e-9);
        prop_assert!(pq <= h(&p, &q).sqrt() + 1e-9);
        let w = |a: &Distribution, b: &Distribution| wasserstein1(a, b).unwrap();
        prop_assert!((w(&p, &q) - w(&q, &p)).abs() < 1e-9);
        prop_assert!(w(&p, &p) < 1e-12);
        prop_assert!(w(&p, &q) <= w(&p, &r) + w(&r, &q) + 1e-9);
        // Pinsker
        let k = kl(&p, &q).unwrap();
        prop_assert!(k >= 2.0 * pq * pq - 1e-6, "kl {k} vs tv {pq}");
    }

    #[test]
    fn logconcave_mle_is_affine_equivariant(law in real_line_law(), n in 3usize..200, seed: u64, a in prop_oneof![-3.0f64..-0.2, 0.2f64..3.0], b in -5.0f64..5.0) {
        let x = sample(&law, n, seed);
        prop_assume!(x.distinct() >= 2);
        let f = logconcave_mle(&x).unwrap();
        let g = logconcave_mle(&x.affine(a, b).unwrap()).unwrap();
        let mapped = f.affine(a, b).unwrap();
        for &t in x.values() {
            let u = a * t + b;
            let (lg, lm) = (g.log_pdf(u), mapped.log_pdf(u));
            prop_assert!((lg - lm).abs() <= 1e-6 * (1.0 + lm.abs()), "{lg} vs {lm}");
        }
    }

    #[test]
    fn logconcave_cdf_contraction(law in real_line_law(), n in 2usize..300, seed: u64, lo in -2.0f64..1.0, w in 0.5f64..4.0) {
        let truth = Distribution::Uniform { lo, hi: lo + w };
        let x = sample(&law, n, seed);
        prop_assume!(x.distinct() >= 2);
        let lhs = kolmogorov(&logconcave_mle(&x).unwrap(), &truth).unwrap();
        prop_assert!(lhs <= 2.0 * kolmogorov(&x.ecdf(), &truth).unwrap() + 1e-12);
    }

    #[test]
    fn score_matching_duality(k in 0.1f64..3.0, model in 0usize..4) {
        let m = [DensityModel::Gaussian, DensityModel::Laplace, DensityModel::Cauchy, DensityModel::Logistic][model].clone();
        let psi = PlScore::huber(k).unwrap();
        let (dmin, _) = score_matching_min(&psi, &m).unwrap();
        let v = variance_factor(&psi, &m).unwrap();
        prop_assert!((dmin + 1.0 / v).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, ..ProptestConfig::default() })]

    #[test]
    fn pava_is_the_majorant_derivative(vw in proptest::collection::vec((-3.0f64..3.0, 0.1f64..2.0), 1..40)) {
        let (v, w): (Vec<f64>, Vec<f64>) = vw.into_iter().unzip();
        let fit = pava_antitonic(&v, &w).unwrap();
        let (mut cx, mut cy) = (vec![0.0], vec![0.0]);
        for i in 0..v.len() {
            cx.push(cx[i] + w[i]);
            cy.push(cy[i] + w[i] * v[i]);
        }
        let m = least_concave_majorant(&PlanarPoints::new(cx.clone(), cy).unwrap()).unwrap();
        for i in 0..v.len() {
            let d = (m.eval(cx[i + 1]).unwrap() - m.eval(cx[i]).unwrap()) / w[i];
            prop_assert!((d - fit[i]).abs() <= 1e-10);
        }
    }
}

#[test]
fn grenander_cdf_is_the_majorant() {
    let x = sample(&Distribution::Exp { rate: 2.0 }, 200, 9);
    let fit = grenander_fit(&x).unwrap();
    let maj = least_concave_majorant(&cumulative_diagram(&x, Some(0.0))).unwrap();
    for (&k, &v) in maj.knots().iter().zip(maj.vals()) {
        assert!((fit.cdf(k) - v).abs() < 1e-12);
    }
}

#[test]
fn projected_scores_are_decreasing_and_centred() {
    let models = [
        DensityModel::Gaussian,
        DensityModel::Laplace,
        DensityModel::Cauchy,
        DensityModel::Logistic,
        DensityModel::mixture(vec![
            MixtureComponent { weight: 0.5, mean: -2.0, sd: 0.7 },
            MixtureComponent { weight: 0.5, mean: 2.0, sd: 0.7 },
        ])
        .unwrap(),
    ];
    for (k, m) in models.into_iter().enumerate() {
        let psi = antitonic_score(&m).unwrap();
        assert!(psi.slopes().windows(2).all(|w| w[1] <= w[0]), "{m:?}");
        assert!(psi.mean().abs() < 2e-3, "{m:?}: {}", psi.mean());
        // the Fisher integral drops a 1e-9 tail on each side
        let (i, is) = (fisher_info(&m).unwrap(), istar(&m).unwrap());
        assert!(is <= i * (1.0 + 1e-6), "{m:?}: {is} > {i}");
        let log_concave = k != 2 && k != 4;
        assert_eq!((i - is).abs() < 5e-3 * i, log_concave, "{m:?}: {is} vs {i}");
    }
}

#[test]
fn m_estimate_is_invariant_to_score_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let z = Distribution::Gaussian { mean: 0.0, sd: 1.0 }.sample(300, &mut rng).unwrap();
    let e = Distribution::Laplace { loc: 0.0, scale: 1.0 }.sample(300, &mut rng).unwrap();
    let rows: Vec<Vec<f64>> = z.iter().map(|&v| vec![v]).collect();
    let y: Vec<f64> = z.iter().zip(&e).map(|(a, b)| 0.5 + 1.5 * a + b).collect();
    let data = LinearModelData::new(&rows, y, true).unwrap();
    let base = PlScore::huber(1.0).unwrap();
    let b0 = m_estimate(&data, &ConvexLoss::from_score(base.clone())).unwrap().beta;
    for c in [0.5, 2.0, 10.0] {
        let b = m_estimate(&data, &ConvexLoss::from_score(base.scaled(c).unwrap())).unwrap().beta;
        for (u, v) in b.iter().zip(&b0) {
            assert!((u - v).abs() < 1e-8, "c={c}: {u} vs {v}");
        }
    }
}

#[test]
fn experiments_are_reproducible_to_the_byte() {
    let mut c = ExperimentConfig::new(ExperimentId::LcmleRate);
    c.n_grid = vec![30, 60, 120];
    c.replicates = 6;
    c.seed = 77;
    let a = run_experiment(&c).unwrap();
    let b = run_experiment(&c).unwrap();
    assert_eq!(a, b);
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let f1 = write_artifacts(&a, d1.path()).unwrap();
    let f2 = write_artifacts(&b, d2.path()).unwrap();
    let mut paths1 = vec![f1.table.clone(), f1.summary.clone()];
    paths1.extend(f1.series.iter().cloned());
    let mut paths2 = vec![f2.table.clone(), f2.summary.clone()];
    paths2.extend(f2.series.iter().cloned());
    assert_eq!(paths1.len(), paths2.len());
    for (p, q) in paths1.iter().zip(&paths2) {
        assert_eq!(p.file_name(), q.file_name());
        assert_eq!(std::fs::read(p).unwrap(), std::fs::read(q).unwrap());
    }
    c.seed = 78;
    assert_ne!(run_experiment(&c).unwrap().table, a.table);
}
