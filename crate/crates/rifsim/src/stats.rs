//! Small numeric kernels shared across the toolkit: pairwise summation,
//! log-sum-exp, ordinary least squares, medians, and the two-sample
//! Kolmogorov-Smirnov distance.

use crate::num::Real;

/// Pairwise (cascade) summation; deterministic and more accurate than a
/// left fold for long rows.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    match xs.len() {
        0 => T::zero(),
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// log(sum_i exp(a_i)), stable for widely spread exponents.
pub fn log_sum_exp<T: Real>(a: &[T]) -> T {
    let m = a.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return T::neg_infinity();
    }
    let shifted: Vec<T> = a.iter().map(|&x| (x - m).exp()).collect();
    m + pairwise_sum(&shifted).ln()
}

#[derive(Clone, Copy, Debug)]
pub struct LinearFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r2: T,
}

/// Ordinary least squares y = slope * x + intercept.
pub fn linear_fit<T: Real>(x: &[T], y: &[T]) -> LinearFit<T> {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "need at least two points");
    let n = T::from_usize_lossy(x.len());
    let mean_x = pairwise_sum(x) / n;
    let mean_y = pairwise_sum(y) / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    let mut syy = T::zero();
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r2 = if syy == T::zero() {
        T::one()
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    LinearFit {
        slope,
        intercept,
        r2,
    }
}

/// Median of an unsorted slice.
pub fn median<T: Real>(xs: &[T]) -> T {
    assert!(!xs.is_empty());
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in median input"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::from_f64_lossy(2.0)
    }
}

/// Two-sample Kolmogorov-Smirnov distance between sorted samples.
pub fn ks_two_sample<T: Real>(a_sorted: &[T], b_sorted: &[T]) -> T {
    assert!(!a_sorted.is_empty() && !b_sorted.is_empty());
    let (mut i, mut j) = (0usize, 0usize);
    let na = T::from_usize_lossy(a_sorted.len());
    let nb = T::from_usize_lossy(b_sorted.len());
    let mut d = T::zero();
    while i < a_sorted.len() && j < b_sorted.len() {
        if a_sorted[i] < b_sorted[j] {
            i += 1;
        } else if b_sorted[j] < a_sorted[i] {
            j += 1;
        } else {
            // consume the whole tie group on both sides before comparing
            let v = a_sorted[i];
            while i < a_sorted.len() && a_sorted[i] == v {
                i += 1;
            }
            while j < b_sorted.len() && b_sorted[j] == v {
                j += 1;
            }
        }
        let fa = T::from_usize_lossy(i) / na;
        let fb = T::from_usize_lossy(j) / nb;
        d = d.max((fa - fb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at the 5% level, assuming
/// independent draws. With pooled (within-tree correlated) samples this is
/// anti-conservative; prefer a Monte Carlo calibrated threshold.
pub fn ks_critical_5pct(n_a: usize, n_b: usize) -> f64 {
    1.358 * ((n_a + n_b) as f64 / (n_a as f64 * n_b as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_exact() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
    }

    #[test]
    fn log_sum_exp_handles_extreme_exponents() {
        let a = [-800.0f64, -800.0];
        let got = log_sum_exp(&a);
        assert!((got - (-800.0 + 2.0f64.ln())).abs() < 1e-12);
        let b = [700.0f64, 700.0];
        assert!((log_sum_exp(&b) - (700.0 + 2.0f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| 3.5 * v - 2.0).collect();
        let fit = linear_fit(&x, &y);
        assert!((fit.slope - 3.5).abs() < 1e-12);
        assert!((fit.intercept + 2.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0f64, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0f64, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn ks_identical_samples_zero() {
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b = [1.0f64, 2.0, 3.0, 4.0];
        assert_eq!(ks_two_sample(&a, &b), 0.0);
    }

    #[test]
    fn ks_known_value() {
        let a = [1.0f64, 1.0, 4.0, 4.0];
        let b = [1.0f64, 1.0, 1.0, 4.0];
        assert!((ks_two_sample(&a, &b) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ks_disjoint_supports() {
        let a = [0.0f64, 1.0];
        let b = [10.0f64, 11.0];
        assert_eq!(ks_two_sample(&a, &b), 1.0);
    }
}
