//! Exact synthesis of stationary Gaussian sequences by circulant embedding.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Square roots of the (scaled) circulant eigenvalues for a target
/// autocovariance, ready for repeated sampling.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub n: usize,
    pub len: usize,
    scaled_sqrt_eig: Vec<f64>,
    /// Fraction of spectral mass that was negative and clipped to zero.
    /// Zero means the embedding is exact.
    pub clipped_fraction: f64,
}

const MAX_DOUBLINGS: u32 = 2;

impl Embedding {
    /// Builds the embedding for `cov(k)`, k = 0..n-1. Grows the circulant up
    /// to four times its minimal size looking for a non-negative spectrum;
    /// if none is found the negative eigenvalues are clipped.
    pub fn new<F: Fn(usize) -> f64>(cov: F, n: usize) -> Result<Embedding> {
        if n == 0 {
            return Err(Error::Domain("embedding length must be >= 1".into()));
        }
        let min_len = (2 * n.saturating_sub(1)).max(2).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for d in 0..=MAX_DOUBLINGS {
            let m = min_len << d;
            let mut buf: Vec<Complex<f64>> = (0..m)
                .map(|k| Complex::new(cov(k.min(m - k)), 0.0))
                .collect();
            planner.plan_fft_forward(m).process(&mut buf);
            let eig: Vec<f64> = buf.iter().map(|c| c.re).collect();
            let total: f64 = eig.iter().map(|e| e.abs()).sum();
            let neg: f64 = eig.iter().filter(|e| **e < 0.0).map(|e| -e).sum();
            let tol = 1e-12 * total;
            let frac = if neg <= tol { 0.0 } else { neg / total };
            if !eig.iter().all(|e| e.is_finite()) {
                return Err(Error::Numerical("non-finite circulant spectrum".into()));
            }
            let better = best.as_ref().map_or(true, |b| frac < b.2);
            if better {
                best = Some((m, eig, frac));
            }
            if frac == 0.0 {
                break;
            }
        }
        let (len, eig, clipped_fraction) = best.expect("at least one attempt");
        let scaled_sqrt_eig = eig
            .iter()
            .map(|&e| (e.max(0.0) / len as f64).sqrt())
            .collect();
        Ok(Embedding {
            n,
            len,
            scaled_sqrt_eig,
            clipped_fraction,
        })
    }

    /// Draws one sequence of length `n`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = self
            .scaled_sqrt_eig
            .iter()
            .map(|&w| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                Complex::new(w * a, w * b)
            })
            .collect();
        FftPlanner::<f64>::new()
            .plan_fft_forward(self.len)
            .process(&mut buf);
        buf.truncate(self.n);
        buf.into_iter().map(|c| c.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    #[test]
    fn white_noise_has_unit_variance() {
        let emb = Embedding::new(|k| if k == 0 { 1.0 } else { 0.0 }, 1000).unwrap();
        assert_eq!(emb.clipped_fraction, 0.0);
        let mut rng = stream(1, Domain::Scratch, 0);
        let mut s2 = 0.0;
        let reps = 200;
        for _ in 0..reps {
            let x = emb.sample(&mut rng);
            s2 += x.iter().map(|v| v * v).sum::<f64>();
        }
        let var = s2 / (reps as f64 * 1000.0);
        assert!((var - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn power_law_covariance_is_reproduced() {
        let cov = |k: usize| {
            if k == 0 {
                1.0
            } else {
                (0.5 * (k as f64).powf(-0.6)).min(1.0)
            }
        };
        let n = 4096;
        let emb = Embedding::new(cov, n).unwrap();
        let mut rng = stream(2, Domain::Scratch, 0);
        let mut c1 = 0.0;
        let mut c10 = 0.0;
        let mut cnt1 = 0.0;
        let mut cnt10 = 0.0;
        for _ in 0..100 {
            let x = emb.sample(&mut rng);
            for i in 0..n - 10 {
                c1 += x[i] * x[i + 1];
                c10 += x[i] * x[i + 10];
                cnt1 += 1.0;
                cnt10 += 1.0;
            }
        }
        assert!((c1 / cnt1 - cov(1)).abs() < 0.02, "{}", c1 / cnt1);
        assert!((c10 / cnt10 - cov(10)).abs() < 0.02, "{}", c10 / cnt10);
    }
}
