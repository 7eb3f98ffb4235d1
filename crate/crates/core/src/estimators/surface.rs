//! Price changes over trade windows, their moments, and their covariance
//! and correlation with generalized imbalances.

use super::fit::{ExponentFit, FitOptions};
use super::imbalance::{check_grid, grid_block, pooled_imbalances, BATCHES};
use super::stats::{batch_means, correlation};
use super::{Realization, ScalingSurface, Statistic};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Δ_w = p((w+1)T) − p(wT) for the floor(N/T) windows of a realization.
pub fn window_price_changes(real: &Realization, t: usize) -> Result<Vec<f64>> {
    let path = real
        .price
        .ok_or_else(|| Error::InsufficientData("realization has no price path".into()))?;
    let nw = real.tape.len() / t;
    let mut out = Vec::with_capacity(nw);
    let mut prev = price_at(path, 0)?;
    for w in 0..nw {
        let next = price_at(path, ((w + 1) * t) as u64)?;
        out.push(next - prev);
        prev = next;
    }
    Ok(out)
}

fn price_at(path: &crate::price::PricePath, k: u64) -> Result<f64> {
    path.value_at(k).ok_or_else(|| {
        Error::InsufficientData(format!("price path does not cover trade position {k}"))
    })
}

fn pooled_changes(
    reals: &[Realization],
    t_grid: &[usize],
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    let per: Vec<Result<Vec<f64>>> = par::map_slice(exec, t_grid, |&t| {
        let mut v = Vec::new();
        for r in reals {
            v.extend(window_price_changes(r, t)?);
        }
        Ok(v)
    });
    per.into_iter().collect()
}

/// E[Δ_T^(2n)] for each order; returns one surface per order (a grid is
/// the single placeholder a = 0) and the fits.
pub fn price_moments(
    reals: &[Realization],
    t_grid: &[usize],
    orders: &[u32],
    fit: FitOptions,
    exec: Execution,
) -> Result<(Vec<ScalingSurface>, Vec<Option<ExponentFit>>)> {
    check_grid(reals, t_grid)?;
    let changes = pooled_changes(reals, t_grid, exec)?;
    let mut surfaces = Vec::new();
    let mut fits = Vec::new();
    for &n in orders {
        let mut s = ScalingSurface::new(Statistic::PriceMoment(n), t_grid, &[0.0]);
        for (ti, d) in changes.iter().enumerate() {
            let p: Vec<f64> = d.iter().map(|v| v.powi(2 * n as i32)).collect();
            let (m, se) = batch_means(&p, BATCHES);
            s.value[ti][0] = m;
            s.stderr[ti][0] = se;
            s.n_windows[ti] = d.len();
        }
        fits.push(s.fit_columns(fit)[0]);
        surfaces.push(s);
    }
    Ok((surfaces, fits))
}

/// E[Δ_T I^a_T] over the (T, a) grid with a power-law fit in T per a.
pub fn covariance_surface(
    reals: &[Realization],
    t_grid: &[usize],
    a_grid: &[f64],
    fit: FitOptions,
    exec: Execution,
) -> Result<(ScalingSurface, Vec<Option<ExponentFit>>)> {
    check_grid(reals, t_grid)?;
    let _ = grid_block(t_grid);
    let changes = pooled_changes(reals, t_grid, exec)?;
    let imb = pooled_imbalances(reals, t_grid, a_grid, exec);
    let mut s = ScalingSurface::new(Statistic::Covariance, t_grid, a_grid);
    for (ai, per_t) in imb.iter().enumerate() {
        for (ti, i) in per_t.iter().enumerate() {
            let d = &changes[ti];
            let p: Vec<f64> = d.iter().zip(i).map(|(x, y)| x * y).collect();
            let (m, se) = batch_means(&p, BATCHES);
            s.value[ti][ai] = m;
            s.stderr[ti][ai] = se;
            s.n_windows[ti] = p.len();
        }
    }
    let fits = s.fit_columns(fit);
    Ok((s, fits))
}

/// Sample correlation R̂_a(T) between Δ and I^a over pooled windows. Entries
/// with a zero-variance side are NaN.
pub fn correlation_surface(
    reals: &[Realization],
    t_grid: &[usize],
    a_grid: &[f64],
    exec: Execution,
) -> Result<ScalingSurface> {
    check_grid(reals, t_grid)?;
    let changes = pooled_changes(reals, t_grid, exec)?;
    let imb = pooled_imbalances(reals, t_grid, a_grid, exec);
    let mut s = ScalingSurface::new(Statistic::Correlation, t_grid, a_grid);
    for (ai, per_t) in imb.iter().enumerate() {
        for (ti, i) in per_t.iter().enumerate() {
            let d = &changes[ti];
            let n = d.len().min(i.len());
            s.n_windows[ti] = n;
            if let Some(r) = correlation(&d[..n], &i[..n]) {
                s.value[ti][ai] = r;
                s.stderr[ti][ai] = (1.0 - r * r) / ((n as f64 - 1.0).max(1.0)).sqrt();
            }
        }
    }
    Ok(s)
}
