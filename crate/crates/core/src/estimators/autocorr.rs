//! Sign autocorrelation, globally and within volume bins.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::fit::{fit_power_law, ExponentFit, FitOptions};
use crate::error::{Error, Result};
use crate::flow::TradeTape;

/// C(τ) = mean of x_t x_{t+τ} over the n − τ available pairs, τ = 0..=max_lag.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let max_lag = max_lag.min(n - 1);
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    (0..=max_lag)
        .map(|k| buf[k].re / len as f64 / (n - k) as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutocorrOptions {
    /// Lags (in the bin-restricted subsequence) used for the power-law fit.
    pub lag_range: (usize, usize),
    /// Bins with fewer trades are flagged unreliable and not fitted.
    pub min_trades: usize,
    /// Bin edges span these quantiles of the rescaled volume; trades beyond
    /// fall into the outermost bins.
    pub edge_quantiles: (f64, f64),
    /// Trades per synthetic day, for the daily-volume normalizer.
    pub day_block: usize,
}

impl Default for AutocorrOptions {
    fn default() -> Self {
        AutocorrOptions {
            lag_range: (10, 1000),
            min_trades: 10_000,
            edge_quantiles: (0.001, 0.999),
            day_block: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinCorrelation {
    pub index: usize,
    /// Edges and geometric center in rescaled volume q / φ_D.
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    /// Center expressed in lots, using the geometric-mean daily volume.
    pub center_volume: f64,
    pub n_trades: usize,
    /// Log-binned lags and the mean correlation in each lag bin.
    pub lags: Vec<f64>,
    pub correlation: Vec<f64>,
    pub fit: Option<ExponentFit>,
    /// Decay exponent γ = −slope of the fit.
    pub gamma: Option<f64>,
    pub reliable: bool,
    /// The top bin; reported but excluded from comparisons.
    pub largest: bool,
}

/// Daily volume of the block containing each trade.
pub(crate) fn daily_volume(tape: &TradeTape, day_block: usize) -> Vec<f64> {
    let day_block = day_block.max(1);
    let mut out = Vec::with_capacity(tape.len());
    for chunk in tape.volume.chunks(day_block) {
        let v: f64 = chunk.iter().sum();
        out.extend(std::iter::repeat(v).take(chunk.len()));
    }
    out
}

pub fn sign_autocorrelation_by_volume_bin(
    tape: &TradeTape,
    n_bins: usize,
    options: AutocorrOptions,
) -> Result<Vec<BinCorrelation>> {
    if n_bins < 2 {
        return Err(Error::config("n_bins", "must be >= 2"));
    }
    if tape.is_empty() {
        return Err(Error::EmptyTape);
    }
    let phi_d = daily_volume(tape, options.day_block);
    let x: Vec<f64> = tape
        .volume
        .iter()
        .zip(&phi_d)
        .map(|(q, d)| (q / d).ln())
        .collect();
    let mean_log_day = phi_d.iter().map(|d| d.ln()).sum::<f64>() / phi_d.len() as f64;
    let mut sorted = x.clone();
    sorted.sort_by(f64::total_cmp);
    let quant = |p: f64| sorted[((sorted.len() - 1) as f64 * p).round() as usize];
    let lo = quant(options.edge_quantiles.0);
    let hi = quant(options.edge_quantiles.1);
    let width = (hi - lo) / n_bins as f64;
    let bin_of = |v: f64| -> usize {
        if width <= 0.0 {
            0
        } else {
            (((v - lo) / width).floor().max(0.0) as usize).min(n_bins - 1)
        }
    };
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for (k, &v) in x.iter().enumerate() {
        members[bin_of(v)].push(tape.sign[k] as f64);
    }
    let (lag_lo, lag_hi) = options.lag_range;
    let mut out = Vec::with_capacity(n_bins);
    for (b, signs) in members.iter().enumerate() {
        let (e0, e1) = (lo + b as f64 * width, lo + (b + 1) as f64 * width);
        let center = (0.5 * (e0 + e1)).exp();
        let reliable = signs.len() >= options.min_trades && signs.len() > 2 * lag_hi;
        let (lags, corr) = if signs.len() > 1 {
            log_binned(
                &autocorrelation(signs, lag_hi.min(signs.len() - 1)),
                lag_lo,
                lag_hi,
            )
        } else {
            (Vec::new(), Vec::new())
        };
        let fit = if reliable {
            let (px, py): (Vec<f64>, Vec<f64>) = lags
                .iter()
                .zip(&corr)
                .filter(|(_, c)| **c > 0.0)
                .map(|(l, c)| (*l, *c))
                .unzip();
            fit_power_law(&px, &py, FitOptions::default()).ok()
        } else {
            None
        };
        out.push(BinCorrelation {
            index: b,
            lo: e0.exp(),
            hi: e1.exp(),
            center,
            center_volume: center * mean_log_day.exp(),
            n_trades: signs.len(),
            lags,
            correlation: corr,
            gamma: fit.map(|f| -f.exponent),
            fit,
            reliable,
            largest: b == n_bins - 1,
        });
    }
    Ok(out)
}

/// Averages C(τ) over logarithmic lag bins (ten per decade) in [lo, hi].
pub fn log_binned(c: &[f64], lo: usize, hi: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lags = Vec::new();
    let mut vals = Vec::new();
    let hi = hi.min(c.len().saturating_sub(1));
    if lo == 0 || lo > hi {
        return (lags, vals);
    }
    let mut edge = lo as f64;
    while edge.round() as usize <= hi {
        let next = edge * 10f64.powf(0.1);
        let a = edge.round() as usize;
        let b = ((next.round() as usize).max(a + 1)).min(hi + 1);
        let n = (b - a) as f64;
        let m: f64 = c[a..b].iter().sum::<f64>() / n;
        let center = ((a as f64) * ((b - 1) as f64)).sqrt();
        lags.push(center);
        vals.push(m);
        edge = next.max(b as f64);
    }
    (lags, vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternating_signs() {
        let x: Vec<f64> = (0..1000)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let c = autocorrelation(&x, 3);
        assert!((c[0] - 1.0).abs() < 1e-12);
        assert!((c[1] + 1.0).abs() < 1e-12);
        assert!((c[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fft_matches_direct() {
        let x: Vec<f64> = (0..300).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let c = autocorrelation(&x, 20);
        for k in 0..=20 {
            let d: f64 = (0..300 - k).map(|t| x[t] * x[t + k]).sum::<f64>() / (300 - k) as f64;
            assert!((c[k] - d).abs() < 1e-9);
        }
    }

    #[test]
    fn log_bins_cover_range() {
        let c = vec![1.0; 2000];
        let (l, v) = log_binned(&c, 10, 1000);
        assert!(l.len() >= 19 && l.len() <= 21, "{}", l.len());
        assert!(v.iter().all(|x| (*x - 1.0).abs() < 1e-12));
        assert!(l[0] >= 10.0 && *l.last().unwrap() <= 1000.0);
    }
}
