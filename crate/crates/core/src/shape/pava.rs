use crate::error::{invalid, Result};

/// Weighted least-squares projection of `values` onto nonincreasing sequences
/// (Pool Adjacent Violators).
pub fn pava_antitonic(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() || values.len() != weights.len() {
        return invalid("pava needs equal-length, non-empty values and weights");
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return invalid("pava weights must be positive and finite");
    }
    // (block mean, total weight, number of entries)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() >= 2 {
            let (m1, w1, c1) = blocks[blocks.len() - 1];
            let (m0, w0, c0) = blocks[blocks.len() - 2];
            if m0 >= m1 {
                break;
            }
            blocks.pop();
            let wt = w0 + w1;
            *blocks.last_mut().unwrap() = ((m0 * w0 + m1 * w1) / wt, wt, c0 + c1);
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (level, _, c) in blocks {
        out.extend(std::iter::repeat_n(level, c));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force over all ways to cut a short sequence into contiguous
    /// blocks; keeps the best nonincreasing block-mean fit.
    fn brute_force(values: &[f64], weights: &[f64]) -> Vec<f64> {
        let n = values.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 0u32..(1 << (n - 1)) {
            let mut fit = Vec::with_capacity(n);
            let mut start = 0;
            for i in 0..n {
                let cut = i == n - 1 || mask & (1 << i) != 0;
                if cut {
                    let sw: f64 = weights[start..=i].iter().sum();
                    let s: f64 = (start..=i).map(|j| values[j] * weights[j]).sum();
                    fit.extend(std::iter::repeat(s / sw).take(i + 1 - start));
                    start = i + 1;
                }
            }
            if fit.windows(2).any(|w| w[0] < w[1] - 1e-15) {
                continue;
            }
            let loss: f64 = (0..n).map(|j| weights[j] * (values[j] - fit[j]).powi(2)).sum();
            if best.as_ref().map_or(true, |(b, _)| loss < *b) {
                best = Some((loss, fit));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn two_block_pool() {
        let out = pava_antitonic(&[0.25, 0.5], &[2.0, 1.0]).unwrap();
        assert_eq!(out, brute_force(&[0.25, 0.5], &[2.0, 1.0]));
        assert!((out[0] - 1.0 / 3.0).abs() < 1e-15 && (out[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn fixed_points() {
        assert_eq!(pava_antitonic(&[0.7, 0.2], &[1.0, 1.0]).unwrap(), vec![0.7, 0.2]);
        assert_eq!(
            pava_antitonic(&[3.0, 3.0, 3.0], &[1.0, 5.0, 0.1]).unwrap(),
            vec![3.0; 3]
        );
    }

    #[test]
    fn errors() {
        assert!(pava_antitonic(&[1.0], &[1.0, 2.0]).is_err());
        assert!(pava_antitonic(&[1.0, 2.0], &[1.0, 0.0]).is_err());
        assert!(pava_antitonic(&[], &[]).is_err());
    }

    #[test]
    fn matches_brute_force_on_small_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.random_range(1..8);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
            let a = pava_antitonic(&v, &w).unwrap();
            let b = brute_force(&v, &w);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
