//! Metaorder populations and the child-order trade tape.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::stats::batch_means;
use crate::kernels::{self, generate_correlated_signs, open_unit, SignSequence};
use crate::par::{self, Execution};
use crate::params::ModelParams;
use crate::rng::{stream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metaorder {
    pub id: u32,
    pub start_time: f64,
    pub sign: i8,
    pub child_volume: f64,
    pub duration: f64,
    pub participation: f64,
}

impl Metaorder {
    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration
    }

    /// Expected total size Q = q φ̃ s.
    pub fn expected_size(&self) -> f64 {
        self.child_volume * self.participation * self.duration
    }

    pub fn is_active(&self, t: f64) -> bool {
        self.start_time <= t && t <= self.end_time()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trade {
    pub trade_idx: u64,
    pub time: f64,
    pub metaorder_id: Option<u32>,
    pub sign: i8,
    pub volume: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub trades: usize,
    /// Wall time at which observation starts.
    pub start: f64,
    /// Wall time of the last trade.
    pub end: f64,
}

impl Horizon {
    pub fn elapsed(&self) -> f64 {
        self.end - self.start
    }
}

/// Summary of the sign generator attached to simulated tapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignDiagnostics {
    pub realized_amplitude: f64,
    pub spectral_clip: f64,
}

/// Trades stored column-wise. Metaorder ids index `metaorders` directly.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeTape {
    pub trade_idx: Vec<u64>,
    pub time: Vec<f64>,
    /// Absent for analysis-only tapes.
    pub metaorder_id: Option<Vec<u32>>,
    pub sign: Vec<i8>,
    pub volume: Vec<f64>,
    /// Observed price after each trade, when known.
    pub price: Option<Vec<f64>>,
    pub metaorders: Vec<Metaorder>,
    pub horizon: Horizon,
    pub params_snapshot: Option<ModelParams>,
    pub sign_diagnostics: Option<SignDiagnostics>,
}

impl TradeTape {
    pub fn len(&self) -> usize {
        self.sign.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sign.is_empty()
    }

    pub fn trade(&self, k: usize) -> Trade {
        Trade {
            trade_idx: self.trade_idx[k],
            time: self.time[k],
            metaorder_id: self.metaorder_id.as_ref().map(|m| m[k]),
            sign: self.sign[k],
            volume: self.volume[k],
        }
    }

    pub fn trades(&self) -> impl Iterator<Item = Trade> + '_ {
        (0..self.len()).map(|k| self.trade(k))
    }

    /// Builds a tape from explicit parts, e.g. a hand-written scenario.
    pub fn from_parts(
        trades: &[Trade],
        metaorders: Vec<Metaorder>,
        horizon: Horizon,
    ) -> Result<Self> {
        let has_ids = trades.iter().all(|t| t.metaorder_id.is_some());
        let tape = TradeTape {
            trade_idx: trades.iter().map(|t| t.trade_idx).collect(),
            time: trades.iter().map(|t| t.time).collect(),
            metaorder_id: has_ids.then(|| trades.iter().map(|t| t.metaorder_id.unwrap()).collect()),
            sign: trades.iter().map(|t| t.sign).collect(),
            volume: trades.iter().map(|t| t.volume).collect(),
            price: None,
            metaorders,
            horizon,
            params_snapshot: None,
            sign_diagnostics: None,
        };
        tape.validate()?;
        Ok(tape)
    }

    /// Analysis-only tape from signs and volumes; times are the trade indices.
    pub fn from_signs_volumes(sign: Vec<i8>, volume: Vec<f64>) -> Result<Self> {
        if sign.len() != volume.len() {
            return Err(Error::Domain("sign and volume lengths differ".into()));
        }
        let n = sign.len();
        let tape = TradeTape {
            trade_idx: (0..n as u64).collect(),
            time: (0..n).map(|k| k as f64).collect(),
            metaorder_id: None,
            sign,
            volume,
            price: None,
            metaorders: Vec::new(),
            horizon: Horizon {
                trades: n,
                start: 0.0,
                end: n.saturating_sub(1) as f64,
            },
            params_snapshot: None,
            sign_diagnostics: None,
        };
        tape.validate()?;
        Ok(tape)
    }

    /// Checks ordering, sign and volume domains, and metaorder references.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.trade_idx.len() != n || self.time.len() != n || self.volume.len() != n {
            return Err(Error::Domain("tape columns have different lengths".into()));
        }
        for k in 0..n {
            if k > 0 {
                if self.trade_idx[k] <= self.trade_idx[k - 1] {
                    return Err(Error::Domain(format!(
                        "trade_idx not increasing at row {k}"
                    )));
                }
                if self.time[k] < self.time[k - 1] {
                    return Err(Error::Domain(format!("time decreasing at row {k}")));
                }
            }
            if self.sign[k] != 1 && self.sign[k] != -1 {
                return Err(Error::Domain(format!("sign {} at row {k}", self.sign[k])));
            }
            if !(self.volume[k] > 0.0 && self.volume[k].is_finite()) {
                return Err(Error::Domain(format!(
                    "volume {} at row {k}",
                    self.volume[k]
                )));
            }
        }
        if let Some(ids) = &self.metaorder_id {
            if ids.len() != n {
                return Err(Error::Domain("metaorder_id column has wrong length".into()));
            }
            if !self.metaorders.is_empty() {
                for (k, &id) in ids.iter().enumerate() {
                    let m = self.metaorders.get(id as usize).ok_or_else(|| {
                        Error::Domain(format!("row {k} references unknown metaorder {id}"))
                    })?;
                    let t = self.time[k];
                    let slack = 1e-9 * (1.0 + t.abs());
                    if t < m.start_time - slack || t > m.end_time() + slack {
                        return Err(Error::Domain(format!(
                            "row {k} at t = {t} outside the window of metaorder {id}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn total_volume(&self) -> f64 {
        par::pairwise_sum(&self.volume)
    }
}

/// Draws the active population at t = 0 of the stationary process: a
/// Poisson(ν s̄) count of metaorders, each with volume biased by s̄_q,
/// size-biased duration and uniform age. Returned in start-time order with
/// ids 0.., signs unset (0).
pub fn initialize_stationary_state<R: Rng + ?Sized>(
    params: &ModelParams,
    rng: &mut R,
) -> Result<Vec<Metaorder>> {
    let flow = params.derived()?;
    if !flow.s_bar.is_finite() {
        return Err(Error::config("mu1", "mean duration diverges"));
    }
    let mean_count = params.nu * flow.s_bar;
    if mean_count == 0.0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(mean_count)
        .map_err(|e| Error::Numerical(format!("poisson({mean_count}): {e}")))?
        .sample(rng) as usize;
    // Rejection envelope for the s̄_q bias: the largest mean duration over
    // the reachable volume range.
    let envelope = {
        let lo = params.mu_of_ln_q(params.m_logq - 9.0 * params.sigma_logq);
        let hi = params.mu_of_ln_q(params.m_logq + 9.0 * params.sigma_logq);
        let mu_min = lo.min(hi);
        if mu_min > 1.0 {
            mu_min * params.s0 / (mu_min - 1.0)
        } else {
            f64::INFINITY
        }
    };
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let q = loop {
            let q = kernels::sample_child_volume(params, rng);
            if params.sigma_logq == 0.0 || params.lambda == 0.0 || !envelope.is_finite() {
                break q;
            }
            if open_unit(rng) * envelope <= params.mean_duration_q(q) {
                break q;
            }
        };
        let s = kernels::sample_size_biased_duration(params, q, rng)?;
        let age = s * rng.random::<f64>();
        out.push(Metaorder {
            id: 0,
            start_time: -age,
            sign: 0,
            child_volume: q,
            duration: s,
            participation: params.phi_child,
        });
    }
    out.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));
    for (i, m) in out.iter_mut().enumerate() {
        m.id = i as u32;
    }
    Ok(out)
}

/// Child execution times of one metaorder inside [max(start, 0), min(end, horizon)].
fn child_times(m: &Metaorder, horizon: f64, seed: u64, out: &mut Vec<(f64, u32)>) {
    let end = m.end_time().min(horizon);
    let mut t = m.start_time.max(0.0);
    if t > end {
        return;
    }
    let mut rng = stream(seed, Domain::Children, m.id as u64);
    let exp = Exp::new(m.participation).expect("participation > 0");
    loop {
        t += exp.sample(&mut rng);
        if t > end {
            break;
        }
        out.push((t, m.id));
    }
}

fn draw_metaorder(params: &ModelParams, seed: u64, id: u32, start: f64) -> Result<Metaorder> {
    let mut rng = stream(seed, Domain::Metaorder, id as u64);
    let q = kernels::sample_child_volume(params, &mut rng);
    let s = kernels::sample_duration(params, q, &mut rng)?;
    Ok(Metaorder {
        id,
        start_time: start,
        sign: 0,
        child_volume: q,
        duration: s,
        participation: params.phi_child,
    })
}

pub fn simulate_tape(params: &ModelParams, horizon_trades: usize, seed: u64) -> Result<TradeTape> {
    simulate_tape_with(params, horizon_trades, seed, Execution::Parallel)
}

/// Simulates until `horizon_trades` trades have occurred after t = 0,
/// starting from the stationary state. All randomness is keyed by `seed`,
/// so the output does not depend on `exec`.
pub fn simulate_tape_with(
    params: &ModelParams,
    horizon_trades: usize,
    seed: u64,
    exec: Execution,
) -> Result<TradeTape> {
    params.validate()?;
    if horizon_trades == 0 {
        return Err(Error::Domain("horizon_trades must be >= 1".into()));
    }
    let flow = params.derived()?;
    if !(flow.trade_rate > 0.0) {
        return Err(Error::Runaway(format!(
            "expected trade rate nu * phi * s_bar = {} is zero",
            flow.trade_rate
        )));
    }
    let mut metaorders =
        initialize_stationary_state(params, &mut stream(seed, Domain::InitialState, 0))?;
    let n_init = metaorders.len() as u32;

    let mut arrivals = stream(seed, Domain::Arrivals, 0);
    let gap = Exp::new(params.nu.max(f64::MIN_POSITIVE)).expect("positive rate");
    let mut next_arrival = if params.nu > 0.0 {
        gap.sample(&mut arrivals)
    } else {
        f64::INFINITY
    };
    let mut starts: Vec<f64> = Vec::new();
    let mut horizon = 1.1 * horizon_trades as f64 / flow.trade_rate + 10.0 * params.s0;

    let trades = loop {
        while next_arrival <= horizon {
            starts.push(next_arrival);
            next_arrival += gap.sample(&mut arrivals);
        }
        let have = metaorders.len() - n_init as usize;
        let fresh: Vec<Result<Metaorder>> = par::map_range(exec, starts.len() - have, |j| {
            let k = have + j;
            draw_metaorder(params, seed, n_init + k as u32, starts[k])
        });
        for m in fresh {
            metaorders.push(m?);
        }
        if metaorders.len() > u32::MAX as usize - 1 {
            return Err(Error::Runaway("more than 2^32 metaorders".into()));
        }

        const CHUNK: usize = 4096;
        let h = horizon;
        let chunks: Vec<Vec<(f64, u32)>> =
            par::map_range(exec, metaorders.len().div_ceil(CHUNK), |c| {
                let mut out = Vec::new();
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(metaorders.len());
                for m in &metaorders[lo..hi] {
                    child_times(m, h, seed, &mut out);
                }
                out
            });
        let total: usize = chunks.iter().map(|c| c.len()).sum();
        if total >= horizon_trades {
            let mut all = Vec::with_capacity(total);
            for c in chunks {
                all.extend(c);
            }
            break all;
        }
        let grow = (1.05 * horizon_trades as f64 / total.max(1) as f64).max(1.25);
        horizon *= grow;
    };

    let mut trades = trades;
    par::sort_by(exec, &mut trades, |a, b| {
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
    });
    trades.truncate(horizon_trades);
    let t_end = trades.last().expect("non-empty").0;

    // Registry: everything initiated up to the last trade.
    let n_meta = metaorders.partition_point(|m| m.start_time <= t_end);
    metaorders.truncate(n_meta);

    let signs: SignSequence =
        generate_correlated_signs(n_meta.max(1), params, &mut stream(seed, Domain::Signs, 0))?;
    for (m, &s) in metaorders.iter_mut().zip(&signs.signs) {
        m.sign = s;
    }

    let n = trades.len();
    let mut time = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    let mut sign = Vec::with_capacity(n);
    let mut volume = Vec::with_capacity(n);
    for &(t, id) in &trades {
        let m = &metaorders[id as usize];
        time.push(t);
        ids.push(id);
        sign.push(m.sign);
        volume.push(m.child_volume);
    }
    Ok(TradeTape {
        trade_idx: (0..n as u64).collect(),
        time,
        metaorder_id: Some(ids),
        sign,
        volume,
        price: None,
        metaorders,
        horizon: Horizon {
            trades: n,
            start: 0.0,
            end: t_end,
        },
        params_snapshot: Some(params.clone()),
        sign_diagnostics: Some(SignDiagnostics {
            realized_amplitude: signs.realized_amplitude,
            spectral_clip: signs.spectral_clip,
        }),
    })
}

/// A realized value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowStatistics {
    pub n_trades: usize,
    pub elapsed: f64,
    pub trade_rate: f64,
    pub volume_flow: f64,
    pub q_mean: f64,
    pub log_q_mean: f64,
    pub log_q_var: f64,
    /// Metaorders initiated inside the observation window.
    pub n_initiated: Option<usize>,
    pub nu: Option<Estimate>,
    pub phi: Option<f64>,
    pub s_bar: Option<Estimate>,
    pub n_bar: Option<Estimate>,
    pub active_mean: Option<Estimate>,
    /// Mean active count over the first and second half of the window.
    pub active_halves: Option<(Estimate, Estimate)>,
    /// (time, active count) samples on a regular wall-time grid.
    pub active_trajectory: Vec<(f64, u32)>,
}

const TRAJECTORY_POINTS: usize = 4096;

/// Realized flow quantities of a tape, for comparison with the stationary
/// identities. Metaorder-level entries are `None` on analysis-only tapes.
pub fn flow_statistics(tape: &TradeTape) -> Result<FlowStatistics> {
    let n = tape.len();
    if n == 0 {
        return Err(Error::EmptyTape);
    }
    let h = tape.horizon;
    let elapsed = h.elapsed();
    let total_volume = tape.total_volume();
    let log_q: Vec<f64> = tape.volume.iter().map(|q| q.ln()).collect();
    let log_q_mean = par::pairwise_sum(&log_q) / n as f64;
    let log_q_var = log_q.iter().map(|l| (l - log_q_mean).powi(2)).sum::<f64>() / n as f64;
    let mut stats = FlowStatistics {
        n_trades: n,
        elapsed,
        trade_rate: n as f64 / elapsed,
        volume_flow: total_volume / elapsed,
        q_mean: total_volume / n as f64,
        log_q_mean,
        log_q_var,
        n_initiated: None,
        nu: None,
        phi: None,
        s_bar: None,
        n_bar: None,
        active_mean: None,
        active_halves: None,
        active_trajectory: Vec::new(),
    };
    let (Some(ids), false) = (&tape.metaorder_id, tape.metaorders.is_empty()) else {
        return Ok(stats);
    };

    let ms = &tape.metaorders;
    let mut child_count = vec![0u64; ms.len()];
    for &id in ids {
        child_count[id as usize] += 1;
    }
    let inside: Vec<&Metaorder> = ms
        .iter()
        .filter(|m| m.start_time >= h.start && m.start_time <= h.end)
        .collect();
    let k = inside.len();
    stats.n_initiated = Some(k);
    if elapsed > 0.0 {
        stats.nu = Some(Estimate {
            value: k as f64 / elapsed,
            stderr: (k as f64).sqrt() / elapsed,
        });
    }
    if k > 0 {
        let durations: Vec<f64> = inside.iter().map(|m| m.duration).collect();
        stats.s_bar = Some(mean_estimate(&durations));
    }
    let completed: Vec<&&Metaorder> = inside.iter().filter(|m| m.end_time() <= h.end).collect();
    let (pool, counts): (Vec<&Metaorder>, Vec<f64>) = if completed.is_empty() {
        let c = inside
            .iter()
            .map(|m| child_count[m.id as usize] as f64)
            .collect();
        (inside.clone(), c)
    } else {
        let c = completed
            .iter()
            .map(|m| child_count[m.id as usize] as f64)
            .collect();
        (completed.iter().map(|m| **m).collect(), c)
    };
    if !counts.is_empty() {
        stats.n_bar = Some(mean_estimate(&counts));
        let dur: f64 = pool.iter().map(|m| m.duration).sum();
        if dur > 0.0 {
            stats.phi = Some(counts.iter().sum::<f64>() / dur);
        }
    }

    // Active count on a regular grid: #starts <= t minus #ends < t.
    let mut starts: Vec<f64> = ms.iter().map(|m| m.start_time).collect();
    let mut ends: Vec<f64> = ms.iter().map(|m| m.end_time()).collect();
    starts.sort_by(f64::total_cmp);
    ends.sort_by(f64::total_cmp);
    let points = if elapsed > 0.0 { TRAJECTORY_POINTS } else { 1 };
    let traj: Vec<(f64, u32)> = (0..points)
        .map(|i| {
            let t = h.start + elapsed * (i as f64 + 0.5) / points as f64;
            let a = starts.partition_point(|&s| s <= t);
            let b = ends.partition_point(|&e| e < t);
            (t, (a - b) as u32)
        })
        .collect();
    let counts: Vec<f64> = traj.iter().map(|p| p.1 as f64).collect();
    let (m, se) = batch_means(&counts, 32);
    stats.active_mean = Some(Estimate {
        value: m,
        stderr: se,
    });
    let half = counts.len() / 2;
    if half >= 32 {
        let (m1, s1) = batch_means(&counts[..half], 16);
        let (m2, s2) = batch_means(&counts[half..], 16);
        stats.active_halves = Some((
            Estimate {
                value: m1,
                stderr: s1,
            },
            Estimate {
                value: m2,
                stderr: s2,
            },
        ));
    }
    stats.active_trajectory = traj;
    Ok(stats)
}

fn mean_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let mean = par::pairwise_sum(xs) / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Estimate {
        value: mean,
        stderr: (var / n).sqrt(),
    }
}

/// Standard-normal helper shared with the price engine.
pub(crate) fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_metaorder_five_trades() {
        let m = Metaorder {
            id: 0,
            start_time: 0.0,
            sign: 1,
            child_volume: 2.0,
            duration: 5.0,
            participation: 1.0,
        };
        let trades: Vec<Trade> = (0..5)
            .map(|k| Trade {
                trade_idx: k,
                time: 0.5 + k as f64,
                metaorder_id: Some(0),
                sign: 1,
                volume: 2.0,
            })
            .collect();
        let tape = TradeTape::from_parts(
            &trades,
            vec![m],
            Horizon {
                trades: 5,
                start: 0.0,
                end: 5.0,
            },
        )
        .unwrap();
        let s = flow_statistics(&tape).unwrap();
        assert_eq!(s.n_bar.unwrap().value, 5.0);
    }

    #[test]
    fn zero_rate_is_runaway() {
        let p = ModelParams {
            nu: 0.0,
            ..ModelParams::single_size(1.5)
        };
        assert!(matches!(simulate_tape(&p, 10, 1), Err(Error::Runaway(_))));
    }

    #[test]
    fn nu_zero_gives_empty_population() {
        let p = ModelParams {
            nu: 0.0,
            ..ModelParams::single_size(1.5)
        };
        let pop = initialize_stationary_state(&p, &mut stream(1, Domain::Scratch, 0)).unwrap();
        assert!(pop.is_empty());
    }

    #[test]
    fn small_tape_is_consistent() {
        let p = ModelParams::single_size(1.5);
        let tape = simulate_tape(&p, 20_000, 9).unwrap();
        assert_eq!(tape.len(), 20_000);
        tape.validate().unwrap();
        // Volume conservation.
        let mut per_meta = vec![0.0; tape.metaorders.len()];
        for t in tape.trades() {
            per_meta[t.metaorder_id.unwrap() as usize] += t.volume;
        }
        let a: f64 = per_meta.iter().sum();
        assert!((a - tape.total_volume()).abs() < 1e-9 * a);
    }

    #[test]
    fn execution_modes_agree() {
        let p = ModelParams::default();
        let a = simulate_tape_with(&p, 5_000, 3, Execution::Sequential).unwrap();
        let b = simulate_tape_with(&p, 5_000, 3, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
