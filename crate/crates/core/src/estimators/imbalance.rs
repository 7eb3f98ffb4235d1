//! Generalized imbalances I^a = Σ ε q^a over non-overlapping trade windows,
//! and the scaling of their even moments.

use serde::{Deserialize, Serialize};

use super::fit::{fit_power_law, ExponentFit, FitOptions};
use super::stats::{batch_means, mean};
use super::{Realization, ScalingSurface, Statistic};
use crate::error::{Error, Result};
use crate::flow::TradeTape;
use crate::par::{self, pairwise_sum, Execution};

pub(crate) const BATCHES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceSeries {
    pub window_t: usize,
    pub a: f64,
    pub values: Vec<f64>,
}

/// q^a with exact results for the common integer and half-integer powers.
#[inline]
pub fn volume_power(q: f64, a: f64) -> f64 {
    if a == 0.0 {
        1.0
    } else if a == 1.0 {
        q
    } else if a == 2.0 {
        q * q
    } else if a == 0.5 {
        q.sqrt()
    } else {
        q.powf(a)
    }
}

/// Per-trade contributions ε_k q_k^a.
pub fn signed_weights(tape: &TradeTape, a: f64) -> Vec<f64> {
    tape.sign
        .iter()
        .zip(&tape.volume)
        .map(|(&e, &q)| e as f64 * volume_power(q, a))
        .collect()
}

pub fn generalized_imbalance(tape: &TradeTape, t: usize, a: f64) -> Result<ImbalanceSeries> {
    if tape.is_empty() {
        return Err(Error::EmptyTape);
    }
    if t == 0 || t > tape.len() {
        return Err(Error::Domain(format!(
            "window {t} outside 1..={}",
            tape.len()
        )));
    }
    if !(a >= 0.0) {
        return Err(Error::Domain(format!("a must be >= 0, got {a}")));
    }
    let w = signed_weights(tape, a);
    Ok(ImbalanceSeries {
        window_t: t,
        a,
        values: BlockSums::new(&w, 1).windows(t),
    })
}

/// Sums over consecutive blocks of `block` trades; windows that are a
/// multiple of the block are then sums of whole blocks.
pub(crate) struct BlockSums {
    block: usize,
    sums: Vec<f64>,
}

impl BlockSums {
    pub(crate) fn new(w: &[f64], block: usize) -> Self {
        let sums = w.chunks_exact(block).map(pairwise_sum).collect();
        BlockSums { block, sums }
    }

    /// Window sums for windows of `t` trades, floor(N / t) of them.
    pub(crate) fn windows(&self, t: usize) -> Vec<f64> {
        debug_assert_eq!(t % self.block, 0);
        let per = t / self.block;
        self.sums.chunks_exact(per).map(pairwise_sum).collect()
    }
}

pub(crate) fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn grid_block(t_grid: &[usize]) -> usize {
    t_grid.iter().fold(0, |g, &t| gcd(g, t)).max(1)
}

/// Checks a T grid against the pooled data: increasing, and at least ten
/// windows at the largest T.
pub(crate) fn check_grid(reals: &[Realization], t_grid: &[usize]) -> Result<()> {
    if reals.is_empty() || reals.iter().all(|r| r.tape.is_empty()) {
        return Err(Error::EmptyTape);
    }
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid[0] == 0 {
        return Err(Error::config(
            "t_grid",
            "must be non-empty, positive and increasing",
        ));
    }
    let t_max = *t_grid.last().unwrap();
    let windows: usize = reals.iter().map(|r| r.tape.len() / t_max).sum();
    if windows < 10 {
        return Err(Error::InsufficientData(format!(
            "only {windows} windows of {t_max} trades; need >= 10"
        )));
    }
    Ok(())
}

/// Pooled window imbalances for every (T, a): `[a][T] -> values`.
pub(crate) fn pooled_imbalances(
    reals: &[Realization],
    t_grid: &[usize],
    a_grid: &[f64],
    exec: Execution,
) -> Vec<Vec<Vec<f64>>> {
    let block = grid_block(t_grid);
    par::map_slice(exec, a_grid, |&a| {
        let mut per_t: Vec<Vec<f64>> = vec![Vec::new(); t_grid.len()];
        for r in reals {
            let bs = BlockSums::new(&signed_weights(r.tape, a), block);
            for (k, &t) in t_grid.iter().enumerate() {
                per_t[k].extend(bs.windows(t));
            }
        }
        per_t
    })
}

/// Moment surfaces Σ_a^(2n)(T) for each order plus the kurtosis ratio
/// Σ^(4)/(Σ^(2))², with exponent fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentAnalysis {
    pub orders: Vec<u32>,
    /// One surface per order, same order as `orders`.
    pub moments: Vec<ScalingSurface>,
    pub kurtosis: ScalingSurface,
    /// `fits[order_idx][a_idx]`.
    pub fits: Vec<Vec<Option<ExponentFit>>>,
    pub kurtosis_fits: Vec<Option<ExponentFit>>,
    /// Excess kurtosis of the window values, `[T][a]`.
    pub excess_kurtosis: Vec<Vec<f64>>,
}

pub fn moment_surface(
    reals: &[Realization],
    t_grid: &[usize],
    a_grid: &[f64],
    orders: &[u32],
    fit: FitOptions,
    exec: Execution,
) -> Result<MomentAnalysis> {
    check_grid(reals, t_grid)?;
    if orders.is_empty() || orders.iter().any(|&n| n == 0) {
        return Err(Error::config("orders", "must be >= 1"));
    }
    let pooled = pooled_imbalances(reals, t_grid, a_grid, exec);
    let nt = t_grid.len();
    let na = a_grid.len();
    let mut moments: Vec<ScalingSurface> = orders
        .iter()
        .map(|&n| ScalingSurface::new(Statistic::Moment(n), t_grid, a_grid))
        .collect();
    let mut kurt = ScalingSurface::new(Statistic::Kurtosis, t_grid, a_grid);
    let mut excess = vec![vec![f64::NAN; na]; nt];
    for (ai, per_t) in pooled.iter().enumerate() {
        for (ti, values) in per_t.iter().enumerate() {
            for (oi, &n) in orders.iter().enumerate() {
                let p: Vec<f64> = values.iter().map(|v| v.powi(2 * n as i32)).collect();
                let (m, se) = batch_means(&p, BATCHES);
                moments[oi].value[ti][ai] = m;
                moments[oi].stderr[ti][ai] = se;
            }
            let (k, kse) = kurtosis_ratio(values);
            kurt.value[ti][ai] = k;
            kurt.stderr[ti][ai] = kse;
            excess[ti][ai] = super::stats::excess_kurtosis(values);
            for s in moments.iter_mut().chain(std::iter::once(&mut kurt)) {
                s.n_windows[ti] = values.len();
            }
        }
    }
    let fits = moments.iter().map(|s| s.fit_columns(fit)).collect();
    let kurtosis_fits = kurt.fit_columns(fit);
    Ok(MomentAnalysis {
        orders: orders.to_vec(),
        moments,
        kurtosis: kurt,
        fits,
        kurtosis_fits,
        excess_kurtosis: excess,
    })
}

/// E[I⁴] / E[I²]² with a batch-spread standard error.
fn kurtosis_ratio(values: &[f64]) -> (f64, f64) {
    let m2: Vec<f64> = values.iter().map(|v| v * v).collect();
    let m4: Vec<f64> = m2.iter().map(|v| v * v).collect();
    let k = mean(&m4) / mean(&m2).powi(2);
    let b = BATCHES.min(values.len() / 2).max(1);
    if b < 2 {
        return (k, f64::NAN);
    }
    let size = values.len() / b;
    let ks: Vec<f64> = (0..b)
        .map(|i| {
            let r = i * size..(i + 1) * size;
            mean(&m4[r.clone()]) / mean(&m2[r]).powi(2)
        })
        .collect();
    let sd = super::stats::variance(&ks).sqrt();
    (k, sd / (b as f64).sqrt())
}

/// Single-a convenience form: surface over T and one fit per order.
pub fn moment_scaling(
    reals: &[Realization],
    t_grid: &[usize],
    a: f64,
    orders: &[u32],
    fit: FitOptions,
) -> Result<(Vec<ScalingSurface>, Vec<ExponentFit>)> {
    let m = moment_surface(reals, t_grid, &[a], orders, fit, Execution::Parallel)?;
    let fits = m
        .fits
        .iter()
        .map(|f| f[0].ok_or_else(|| Error::InsufficientData("moment fit failed".into())))
        .collect::<Result<Vec<_>>>()?;
    Ok((m.moments, fits))
}

/// Fits a single column, returning `None` if the fit is impossible.
pub(crate) fn try_fit(x: &[f64], y: &[f64], fit: FitOptions) -> Option<ExponentFit> {
    fit_power_law(x, y, fit).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_trades() -> TradeTape {
        TradeTape::from_signs_volumes(vec![1, 1, -1], vec![2.0, 3.0, 1.0]).unwrap()
    }

    #[test]
    fn small_examples() {
        let t = three_trades();
        assert_eq!(generalized_imbalance(&t, 3, 0.0).unwrap().values, vec![1.0]);
        assert_eq!(generalized_imbalance(&t, 3, 1.0).unwrap().values, vec![4.0]);
        assert_eq!(
            generalized_imbalance(&t, 3, 2.0).unwrap().values,
            vec![12.0]
        );
        assert_eq!(generalized_imbalance(&t, 2, 0.0).unwrap().values, vec![2.0]);
    }

    #[test]
    fn block_windows_match_direct() {
        let w: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let direct: Vec<f64> = w.chunks_exact(24).map(|c| c.iter().sum()).collect();
        assert_eq!(BlockSums::new(&w, 8).windows(24), direct);
    }

    #[test]
    fn grid_block_is_gcd() {
        assert_eq!(grid_block(&[16, 24, 32, 48]), 8);
        assert_eq!(grid_block(&[7]), 7);
    }
}
