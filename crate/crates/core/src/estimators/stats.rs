//! Small descriptive-statistics helpers.

use crate::par::pairwise_sum;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let d: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&d) / (n - 1) as f64
}

/// Mean and its standard error from `n_batches` contiguous batch means.
/// Falls back to the naive i.i.d. error when there are too few samples.
pub fn batch_means(xs: &[f64], n_batches: usize) -> (f64, f64) {
    let n = xs.len();
    let m = mean(xs);
    if n < 2 {
        return (m, f64::NAN);
    }
    let b = n_batches.min(n / 2).max(2);
    if n < 2 * b {
        return (m, (variance(xs) / n as f64).sqrt());
    }
    let size = n / b;
    let means: Vec<f64> = (0..b)
        .map(|i| mean(&xs[i * size..(i + 1) * size]))
        .collect();
    (m, (variance(&means) / b as f64).sqrt())
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn correlation(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = mean(&x[..n]);
    let my = mean(&y[..n]);
    let mut sxx = Vec::with_capacity(n);
    let mut syy = Vec::with_capacity(n);
    let mut sxy = Vec::with_capacity(n);
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx.push(dx * dx);
        syy.push(dy * dy);
        sxy.push(dx * dy);
    }
    let (a, b, c) = (pairwise_sum(&sxx), pairwise_sum(&syy), pairwise_sum(&sxy));
    if a <= 0.0 || b <= 0.0 {
        return None;
    }
    Some((c / (a.sqrt() * b.sqrt())).clamp(-1.0, 1.0))
}

/// Excess kurtosis m4/m2² - 3.
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let d2: Vec<f64> = xs.iter().map(|x| (x - m).powi(2)).collect();
    let d4: Vec<f64> = d2.iter().map(|v| v * v).collect();
    let m2 = mean(&d2);
    mean(&d4) / (m2 * m2) - 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_correlation() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        assert_eq!(correlation(&x, &y), Some(1.0));
        assert_eq!(correlation(&x, &[1.0; 4]), None);
    }

    #[test]
    fn batch_error_of_constant_is_zero() {
        let (m, se) = batch_means(&[2.0; 1000], 20);
        assert_eq!(m, 2.0);
        assert_eq!(se, 0.0);
    }
}
