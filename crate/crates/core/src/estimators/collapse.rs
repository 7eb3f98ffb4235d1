//! Distribution collapse of rescaled imbalances and the aggregated-impact
//! curve E[Δ | I^a].

use serde::{Deserialize, Serialize};

use super::fit::{fit_power_law, FitOptions};
use super::imbalance::{check_grid, pooled_imbalances};
use super::stats::{batch_means, mean};
use super::surface::window_price_changes;
use super::Realization;
use crate::error::{Error, Result};
use crate::par::Execution;

/// Two-sample Kolmogorov–Smirnov distance between `scale_a · a` and
/// `scale_b · b`; both inputs sorted ascending, scales positive.
pub fn ks_distance(a: &[f64], b: &[f64], scale_a: f64, scale_b: f64) -> f64 {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return 1.0;
    }
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = (a[i] * scale_a).min(b[j] * scale_b);
        while i < n && a[i] * scale_a <= x {
            i += 1;
        }
        while j < m && b[j] * scale_b <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

fn sorted(series: &[(usize, Vec<f64>)]) -> Vec<(f64, Vec<f64>)> {
    series
        .iter()
        .map(|(t, v)| {
            let mut s = v.clone();
            s.sort_by(f64::total_cmp);
            (*t as f64, s)
        })
        .collect()
}

fn max_pairwise(sorted: &[(f64, Vec<f64>)], chi: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            let (ti, a) = &sorted[i];
            let (tj, b) = &sorted[j];
            worst = worst.max(ks_distance(a, b, ti.powf(-chi), tj.powf(-chi)));
        }
    }
    worst
}

/// Largest pairwise KS distance among the series rescaled by T^{−χ}.
pub fn distribution_collapse(series: &[(usize, Vec<f64>)], chi: f64) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::InsufficientData(
            "collapse needs >= 2 window sizes".into(),
        ));
    }
    Ok(max_pairwise(&sorted(series), chi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseScan {
    pub chi_grid: Vec<f64>,
    pub ks: Vec<f64>,
    pub best_chi: f64,
    pub best_ks: f64,
}

/// Scans χ over `chi_grid` and returns the KS-minimizing value.
pub fn scan_collapse(series: &[(usize, Vec<f64>)], chi_grid: &[f64]) -> Result<CollapseScan> {
    if series.len() < 2 {
        return Err(Error::InsufficientData(
            "collapse needs >= 2 window sizes".into(),
        ));
    }
    if chi_grid.is_empty() {
        return Err(Error::config("chi_grid", "must be non-empty"));
    }
    let s = sorted(series);
    let ks: Vec<f64> = chi_grid.iter().map(|&c| max_pairwise(&s, c)).collect();
    let (k, _) = ks
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    Ok(CollapseScan {
        chi_grid: chi_grid.to_vec(),
        best_chi: chi_grid[k],
        best_ks: ks[k],
        ks,
    })
}

/// Default χ grid: 0.30 to 1.00 in steps of 0.005.
pub fn default_chi_grid() -> Vec<f64> {
    (0..=140).map(|i| 0.3 + 0.005 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactCurve {
    pub t: usize,
    pub a: f64,
    /// Mean I^a within each quantile bin.
    pub imbalance: Vec<f64>,
    pub mean_delta: Vec<f64>,
    pub stderr: Vec<f64>,
    pub count: Vec<usize>,
}

/// Bins windows by quantiles of I^a and averages the price change per bin.
pub fn aggregated_impact_curve(
    reals: &[Realization],
    t: usize,
    a: f64,
    n_bins: usize,
) -> Result<ImpactCurve> {
    if n_bins == 0 {
        return Err(Error::config("n_bins", "must be >= 1"));
    }
    check_grid(reals, &[t])?;
    let imb = pooled_imbalances(reals, &[t], &[a], Execution::Parallel)
        .pop()
        .and_then(|mut v| v.pop())
        .unwrap_or_default();
    let mut d = Vec::new();
    for r in reals {
        d.extend(window_price_changes(r, t)?);
    }
    let mut pairs: Vec<(f64, f64)> = imb.into_iter().zip(d).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = pairs.len();
    let mut curve = ImpactCurve {
        t,
        a,
        imbalance: Vec::new(),
        mean_delta: Vec::new(),
        stderr: Vec::new(),
        count: Vec::new(),
    };
    for b in 0..n_bins {
        let lo = b * n / n_bins;
        let hi = (b + 1) * n / n_bins;
        if hi <= lo {
            continue;
        }
        let xs: Vec<f64> = pairs[lo..hi].iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pairs[lo..hi].iter().map(|p| p.1).collect();
        let (m, _) = batch_means(&ys, 1);
        let se = if ys.len() > 1 {
            (super::stats::variance(&ys) / ys.len() as f64).sqrt()
        } else {
            f64::NAN
        };
        curve.imbalance.push(mean(&xs));
        curve.mean_delta.push(m);
        curve.stderr.push(se);
        curve.count.push(ys.len());
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseExponents {
    pub chi: f64,
    pub ks: f64,
    /// ω = χ − 1/2 under the diffusive-price normalization.
    pub omega: f64,
    /// ω from the decay of E[Δ I^a] / Σ_a² with T, when prices exist.
    pub omega_naive: Option<f64>,
}

/// χ from the collapse of I^a over `t_set`; ω = χ − 1/2, plus the naive
/// covariance-ratio ω when the realizations carry prices.
pub fn collapse_exponents(
    reals: &[Realization],
    t_set: &[usize],
    a: f64,
    chi_grid: &[f64],
) -> Result<CollapseExponents> {
    check_grid(reals, t_set)?;
    let imb = pooled_imbalances(reals, t_set, &[a], Execution::Parallel)
        .pop()
        .unwrap_or_default();
    let series: Vec<(usize, Vec<f64>)> = t_set.iter().cloned().zip(imb.iter().cloned()).collect();
    let scan = scan_collapse(&series, chi_grid)?;
    let omega_naive = if reals.iter().all(|r| r.price.is_some()) {
        let mut ratio = Vec::new();
        for (k, &t) in t_set.iter().enumerate() {
            let mut d = Vec::new();
            for r in reals {
                d.extend(window_price_changes(r, t)?);
            }
            let i = &imb[k];
            let cov = mean(&d.iter().zip(i).map(|(x, y)| x * y).collect::<Vec<_>>());
            let var = mean(&i.iter().map(|v| v * v).collect::<Vec<_>>());
            ratio.push(cov / var);
        }
        let x: Vec<f64> = t_set.iter().map(|&t| t as f64).collect();
        fit_power_law(&x, &ratio, FitOptions::default())
            .ok()
            .map(|f| -f.exponent)
    } else {
        None
    };
    Ok(CollapseExponents {
        chi: scan.best_chi,
        ks: scan.best_ks,
        omega: scan.best_chi - 0.5,
        omega_naive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_series_collapse_at_zero() {
        let v: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let s = vec![(16, v.clone()), (32, v.clone()), (64, v)];
        assert_eq!(distribution_collapse(&s, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn ks_of_shifted_samples() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let b: Vec<f64> = (50..150).map(|i| i as f64).collect();
        assert!((ks_distance(&a, &b, 1.0, 1.0) - 0.5).abs() < 1e-12);
        assert_eq!(ks_distance(&a, &a, 1.0, 1.0), 0.0);
    }
}
