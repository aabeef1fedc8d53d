//! Small statistics helpers with reproducible summation order.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

/// Pairwise (cascade) summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl MeanSe {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN, count: 0 };
        }
        let mean = pairwise_sum(xs) / n as f64;
        if n == 1 {
            return Self { mean, se: f64::NAN, count: 1 };
        }
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&dev) / (n - 1) as f64;
        Self { mean, se: (var / n as f64).sqrt(), count: n }
    }

    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.se
    }
}

/// Median by sorting a copy; NaNs are ordered last.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Kolmogorov distance between a lattice law and `N(0, sigma^2)`.
///
/// `probs[k]` is the mass at the integer `k - offset`; the support lives on a
/// lattice of span `span`, and the normal CDF is evaluated at the midpoints
/// between lattice points (continuity correction).
pub fn ks_lattice_vs_normal(offset: i64, probs: &[f64], sigma: f64, span: i64) -> f64 {
    let mut cdf = 0.0;
    let mut worst: f64 = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        cdf += p;
        let x = k as i64 - offset;
        let mid = (x as f64 + 0.5 * span as f64) / sigma;
        worst = worst.max((cdf - normal_cdf(mid)).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }

    #[test]
    fn mean_and_se() {
        let m = MeanSe::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn ks_of_fine_binomial_is_small() {
        let n = 400usize;
        let mut probs = vec![0.0; 2 * n + 1];
        let mut logc = 0.0f64;
        for k in 0..=n {
            if k > 0 {
                logc += ((n - k + 1) as f64).ln() - (k as f64).ln();
            }
            probs[2 * k] = (logc - n as f64 * 2f64.ln()).exp();
        }
        let ks = ks_lattice_vs_normal(n as i64, &probs, (n as f64).sqrt(), 2);
        assert!(ks < 5e-3, "{ks}");
    }
}
