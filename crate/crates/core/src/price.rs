//! Price paths: per-metaorder impact trajectories, random impact, and the
//! fundamental component.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::expsum::{self, ExpSumNodes};
use crate::flow::{normal, Metaorder, TradeTape};
use crate::par::{self, Execution};
use crate::params::{ModelParams, PropagatorMode};
use crate::rng::{stream, Domain};

/// 𝓑_β = 2 Γ(1/2 + β) Γ(1 − β) / √π.
pub fn b_beta(beta: f64) -> f64 {
    2.0 * gamma(0.5 + beta) * gamma(1.0 - beta) / std::f64::consts::PI.sqrt()
}

/// Impact kernel with the market-wide τ0 resolved once.
#[derive(Debug, Clone)]
pub struct ImpactModel {
    params: ModelParams,
    pub mode: PropagatorMode,
    pub tau0: f64,
}

impl ImpactModel {
    pub fn new(params: &ModelParams, mode: PropagatorMode) -> Result<Self> {
        let mut p = params.clone();
        p.mode = mode;
        let tau0 = p.derived()?.tau0;
        if !(tau0.is_finite() && tau0 > 0.0) {
            return Err(Error::Domain(format!("tau0 = {tau0} is not usable")));
        }
        Ok(ImpactModel {
            params: p,
            mode,
            tau0,
        })
    }

    pub fn beta(&self, q: f64) -> f64 {
        self.params.beta_q(q)
    }

    /// 𝓘₁(q, φ̃) = 𝓑_β √φ̃ θ0 √q (φ̃ τ0)^β.
    pub fn i1(&self, q: f64, phi: f64) -> f64 {
        let beta = self.beta(q);
        b_beta(beta) * phi.sqrt() * self.params.theta0 * q.sqrt() * (phi * self.tau0).powf(beta)
    }

    /// 𝓘₀ = φ̃ θ(q) τ0^β / (1 − β), the standard-propagator prefactor.
    pub fn i0(&self, q: f64, phi: f64) -> Result<f64> {
        let beta = self.beta(q);
        if beta >= 1.0 {
            return Err(Error::Domain(format!(
                "beta_q = {beta} >= 1 in standard mode"
            )));
        }
        Ok(phi * self.params.theta0 * q.sqrt() * self.tau0.powf(beta) / (1.0 - beta))
    }

    /// Post-completion form D [t^α − (t − s)^α] in elapsed time t: (D, α).
    pub fn decay_form(&self, m: &Metaorder) -> Result<(f64, f64)> {
        let q = m.child_volume;
        let alpha = 1.0 - self.beta(q);
        match self.mode {
            PropagatorMode::Standard => Ok((self.i0(q, m.participation)?, alpha)),
            PropagatorMode::TwoTime | PropagatorMode::Permanent => {
                let i1 = self.i1(q, m.participation);
                Ok((i1 * m.duration.powf(0.5 - alpha), alpha))
            }
        }
    }

    /// Unsigned trajectory value at elapsed time `t` since the start.
    pub fn value(&self, m: &Metaorder, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let s = m.duration;
        let q = m.child_volume;
        if t <= s {
            return match self.mode {
                PropagatorMode::Standard => {
                    let alpha = 1.0 - self.beta(q);
                    Ok(self.i0(q, m.participation)? * t.powf(alpha))
                }
                _ => Ok(self.i1(q, m.participation) * t.sqrt()),
            };
        }
        let (d, alpha) = self.decay_form(m)?;
        if alpha >= 1.0 {
            return Ok(d * s);
        }
        Ok(d * power_difference(t, s, alpha))
    }

    pub fn peak(&self, m: &Metaorder) -> Result<f64> {
        self.value(m, m.duration)
    }
}

/// t^α − (t − s)^α for t ≥ s, without cancellation for t ≫ s.
fn power_difference(t: f64, s: f64, alpha: f64) -> f64 {
    let r = s / t;
    if r < 1e-3 {
        // t^α [1 − (1 − r)^α] = −t^α expm1(α ln(1 − r))
        -t.powf(alpha) * (alpha * (-r).ln_1p()).exp_m1()
    } else {
        t.powf(alpha) - (t - s).powf(alpha)
    }
}

/// Trajectory value of one metaorder; convenience wrapper around
/// [`ImpactModel`].
pub fn impact_trajectory_value(
    metaorder: &Metaorder,
    elapsed: f64,
    params: &ModelParams,
    mode: PropagatorMode,
) -> Result<f64> {
    ImpactModel::new(params, mode)?.value(metaorder, elapsed)
}

pub fn peak_impact(
    metaorder: &Metaorder,
    params: &ModelParams,
    mode: PropagatorMode,
) -> Result<f64> {
    ImpactModel::new(params, mode)?.peak(metaorder)
}

/// Where the price is observed, in trade positions 0..=N. Position N means
/// the end of the tape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationGrid {
    /// Every `step`-th trade, including 0 and N when divisible.
    Regular {
        step: u64,
    },
    /// 0 plus geometrically spaced positions.
    Geometric {
        per_decade: u32,
    },
    Explicit(Vec<u64>),
}

impl ObservationGrid {
    pub fn positions(&self, n_trades: usize) -> Result<Vec<u64>> {
        let n = n_trades as u64;
        let mut v: Vec<u64> = match self {
            ObservationGrid::Regular { step } => {
                if *step == 0 {
                    return Err(Error::config("price_grid.step", "must be >= 1"));
                }
                (0..=n / step).map(|k| k * step).collect()
            }
            ObservationGrid::Geometric { per_decade } => {
                if *per_decade == 0 {
                    return Err(Error::config("price_grid.per_decade", "must be >= 1"));
                }
                let mut v = vec![0u64];
                let mut j = 0u32;
                loop {
                    let x = 10f64.powf(j as f64 / *per_decade as f64).round() as u64;
                    if x > n {
                        break;
                    }
                    v.push(x);
                    j += 1;
                }
                v
            }
            ObservationGrid::Explicit(p) => {
                if p.iter().any(|&k| k > n) {
                    return Err(Error::Domain("grid position beyond the tape".into()));
                }
                p.clone()
            }
        };
        v.sort_unstable();
        v.dedup();
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceComponents {
    pub deterministic: Vec<f64>,
    pub random_impact: Vec<f64>,
    pub fundamental: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePath {
    /// Trade positions, increasing.
    pub grid: Vec<u64>,
    pub times: Vec<f64>,
    pub total: Vec<f64>,
    /// Absent for observed (external) prices.
    pub components: Option<PriceComponents>,
}

impl PricePath {
    /// Price at trade position `k`; position N falls back to the last trade.
    pub fn value_at(&self, k: u64) -> Option<f64> {
        match self.grid.binary_search(&k) {
            Ok(i) => Some(self.total[i]),
            Err(i) if i == self.grid.len() && i > 0 && k == self.grid[i - 1] + 1 => {
                Some(self.total[i - 1])
            }
            Err(_) => None,
        }
    }

    /// Wraps the per-trade prices carried by a tape.
    pub fn from_trade_prices(tape: &TradeTape) -> Option<PricePath> {
        let price = tape.price.as_ref()?;
        Some(PricePath {
            grid: (0..price.len() as u64).collect(),
            times: tape.time.clone(),
            total: price.clone(),
            components: None,
        })
    }

    /// Price path from observed (position, price) pairs.
    pub fn observed(grid: Vec<u64>, total: Vec<f64>, tape: &TradeTape) -> PricePath {
        let times = grid.iter().map(|&k| grid_time(tape, k)).collect();
        PricePath {
            grid,
            times,
            total,
            components: None,
        }
    }
}

fn grid_time(tape: &TradeTape, k: u64) -> f64 {
    let k = k as usize;
    if k < tape.len() {
        tape.time[k]
    } else {
        tape.horizon.end
    }
}

/// Sources closer than this (in time after completion) are evaluated
/// directly; older ones go through the exponential sum.
const NEAR_WINDOW_S0: f64 = 16.0;
const EXPSUM_STEP: f64 = 0.5;
const BLOCK: usize = 2048;

pub fn assemble_price_path(
    tape: &TradeTape,
    params: &ModelParams,
    mode: PropagatorMode,
    grid: &ObservationGrid,
    seed: u64,
) -> Result<PricePath> {
    assemble_price_path_with(tape, params, mode, grid, seed, Execution::Parallel)
}

struct Source {
    start: f64,
    end: f64,
    duration: f64,
    /// Signed rise ε c t^e while active.
    rise_coef: f64,
    rise_exp: f64,
    /// Signed decay form ε D [t^α − (t − s)^α] and ε D α/Γ(1−α).
    d: f64,
    dc: f64,
    alpha: f64,
    /// z∞ 𝓘₁ η for the random component.
    noise: f64,
}

fn build_sources(
    tape: &TradeTape,
    params: &ModelParams,
    model: &ImpactModel,
    seed: u64,
    exec: Execution,
) -> Result<Vec<Source>> {
    let out: Vec<Result<Source>> = par::map_slice(exec, &tape.metaorders, |m| {
        let sign = m.sign as f64;
        let (d, alpha) = model.decay_form(m)?;
        let i1 = model.i1(m.child_volume, m.participation);
        let (rise_coef, rise_exp) = match model.mode {
            PropagatorMode::Standard => (model.i0(m.child_volume, m.participation)?, alpha),
            _ => (i1, 0.5),
        };
        let noise = if params.z_inf > 0.0 {
            let eta = normal(&mut stream(seed, Domain::ImpactNoise, m.id as u64));
            params.z_inf * i1 * eta
        } else {
            0.0
        };
        Ok(Source {
            start: m.start_time,
            end: m.end_time(),
            duration: m.duration,
            rise_coef: sign * rise_coef,
            rise_exp,
            d: sign * d,
            dc: sign * d * expsum::coefficient(alpha),
            alpha,
            noise,
        })
    });
    out.into_iter().collect()
}

impl Source {
    fn post_value(&self, el: f64) -> f64 {
        if self.alpha >= 1.0 {
            self.d * self.duration
        } else {
            self.d * power_difference(el, self.duration, self.alpha)
        }
    }
}

/// Sums every metaorder's trajectory at each grid position. Active and
/// recently finished metaorders are evaluated exactly; the decaying tails of
/// older ones share one exponential-sum accumulator per decay rate, so the
/// cost is O((N_meta + |grid|) × nodes) instead of O(N_meta × |grid|).
pub fn assemble_price_path_with(
    tape: &TradeTape,
    params: &ModelParams,
    mode: PropagatorMode,
    grid: &ObservationGrid,
    seed: u64,
    exec: Execution,
) -> Result<PricePath> {
    let positions = grid.positions(tape.len())?;
    let times: Vec<f64> = positions.iter().map(|&k| grid_time(tape, k)).collect();
    let g = positions.len();
    let mut det = vec![0.0; g];
    let mut rnd = vec![0.0; g];

    if params.theta0 > 0.0 && !tape.metaorders.is_empty() && g > 0 {
        let model = ImpactModel::new(params, mode)?;
        let sources = build_sources(tape, params, &model, seed, exec)?;
        let x_near = NEAR_WINDOW_S0 * params.s0;

        // Sequential sweep: exact near field, list of far-field insertions.
        let mut order: Vec<usize> = (0..sources.len()).collect();
        order.sort_by(|&a, &b| {
            sources[a]
                .start
                .total_cmp(&sources[b].start)
                .then(a.cmp(&b))
        });
        let mut next = 0;
        let mut near: Vec<(usize, bool)> = Vec::new();
        let mut random_const = 0.0;
        let mut far_const = 0.0;
        let mut far_const_at = vec![0.0; g];
        let mut inserts: Vec<usize> = Vec::new();
        let mut insert_offsets = Vec::with_capacity(g + 1);
        for p in 0..g {
            let t = times[p];
            while next < order.len() && sources[order[next]].start <= t {
                near.push((order[next], false));
                next += 1;
            }
            insert_offsets.push(inserts.len());
            let mut dsum = 0.0;
            let mut rsum = 0.0;
            near.retain_mut(|(i, fixed)| {
                let src = &sources[*i];
                let el = t - src.start;
                if el <= src.duration {
                    dsum += src.rise_coef * el.powf(src.rise_exp);
                    rsum += src.noise * el.sqrt();
                    return true;
                }
                if !*fixed {
                    random_const += src.noise * src.duration.sqrt();
                    *fixed = true;
                }
                if t - src.end < x_near {
                    dsum += src.post_value(el);
                    return true;
                }
                if src.alpha >= 1.0 {
                    // Permanent plateau: a constant from now on.
                    far_const += src.d * src.duration;
                } else {
                    inserts.push(*i);
                }
                false
            });
            det[p] = dsum;
            rnd[p] = rsum + random_const;
            far_const_at[p] = far_const;
        }
        insert_offsets.push(inserts.len());

        if !inserts.is_empty() {
            let t_last = times[g - 1];
            let first_start = sources
                .iter()
                .map(|s| s.start)
                .fold(f64::INFINITY, f64::min);
            let nodes = ExpSumNodes::new(x_near, (t_last - first_start).max(x_near), EXPSUM_STEP);
            // Constant tails below the first node.
            let mut tail = 0.0;
            let mut tail_at = vec![0.0; g];
            for p in 0..g {
                for &i in &inserts[insert_offsets[p]..insert_offsets[p + 1]] {
                    let src = &sources[i];
                    if src.alpha < 1.0 {
                        tail += nodes.tail(src.d, src.alpha, src.duration);
                    }
                }
                tail_at[p] = tail;
            }
            let far = far_field(&nodes, &sources, &inserts, &insert_offsets, &times, exec);
            for p in 0..g {
                det[p] += far[p] + tail_at[p] + far_const_at[p];
            }
        } else {
            for p in 0..g {
                det[p] += far_const_at[p];
            }
        }
    }

    let fund = fundamental_path(
        tape,
        params,
        &ObservationGrid::Explicit(positions.clone()),
        seed,
    )?;
    let total = (0..g).map(|p| det[p] + rnd[p] + fund[p]).collect();
    Ok(PricePath {
        grid: positions,
        times,
        total,
        components: Some(PriceComponents {
            deterministic: det,
            random_impact: rnd,
            fundamental: fund,
        }),
    })
}

/// Exponential-sum part of the far field at every grid point. Work is split
/// over nodes within blocks of grid points; the per-point reduction over
/// nodes runs in a fixed order, so results do not depend on threading.
fn far_field(
    nodes: &ExpSumNodes,
    sources: &[Source],
    inserts: &[usize],
    offsets: &[usize],
    times: &[f64],
    exec: Execution,
) -> Vec<f64> {
    let g = times.len();
    let mut out = vec![0.0; g];
    let mut acc = vec![0.0; nodes.len()];
    let mut p0 = 0;
    while p0 < g {
        let p1 = (p0 + BLOCK).min(g);
        let results: Vec<(f64, Vec<f64>)> = par::map_range(exec, nodes.len(), |j| {
            let lam = nodes.lambda[j];
            let mut a = acc[j];
            let mut vals = Vec::with_capacity(p1 - p0);
            for p in p0..p1 {
                if p > 0 {
                    a *= (-lam * (times[p] - times[p - 1])).exp();
                }
                for &i in &inserts[offsets[p]..offsets[p + 1]] {
                    let s = &sources[i];
                    a += nodes.weight(j, s.dc, s.alpha, s.duration, times[p] - s.end);
                }
                vals.push(a);
            }
            (a, vals)
        });
        for (j, (a, vals)) in results.into_iter().enumerate() {
            acc[j] = a;
            for (k, v) in vals.into_iter().enumerate() {
                out[p0 + k] += v;
            }
        }
        p0 = p1;
    }
    out
}

/// Reference O(N_meta × |grid|) evaluation of the deterministic component.
pub fn deterministic_component_direct(
    tape: &TradeTape,
    params: &ModelParams,
    mode: PropagatorMode,
    grid: &ObservationGrid,
) -> Result<Vec<f64>> {
    let positions = grid.positions(tape.len())?;
    let model = ImpactModel::new(params, mode)?;
    positions
        .iter()
        .map(|&k| {
            let t = grid_time(tape, k);
            let mut v = 0.0;
            for m in &tape.metaorders {
                if m.start_time <= t {
                    v += m.sign as f64 * model.value(m, t - m.start_time)?;
                }
            }
            Ok(v)
        })
        .collect()
}

/// Fundamental component on the grid: Brownian motion in wall time with
/// variance σ_F²(1 − ρ²) per unit time, plus a permanent step
/// ρ σ_F / √ν · ε q^ψ at every initiation after t = 0.
pub fn fundamental_path(
    tape: &TradeTape,
    params: &ModelParams,
    grid: &ObservationGrid,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(params.rho >= 0.0 && params.rho < 1.0) {
        return Err(Error::config("rho", "must lie in [0, 1)"));
    }
    let positions = grid.positions(tape.len())?;
    let g = positions.len();
    let mut out = vec![0.0; g];
    if params.sigma_f == 0.0 || g == 0 {
        return Ok(out);
    }
    let diff_sd = params.sigma_f * (1.0 - params.rho * params.rho).sqrt();
    let c = if params.rho > 0.0 {
        params.rho * params.sigma_f / params.nu.sqrt()
    } else {
        0.0
    };
    let mut rng = stream(seed, Domain::Fundamental, 0);
    let mut informed: Vec<&Metaorder> = if c > 0.0 {
        tape.metaorders
            .iter()
            .filter(|m| m.start_time > 0.0)
            .collect()
    } else {
        Vec::new()
    };
    informed.sort_by(|a, b| a.start_time.total_cmp(&b.start_time).then(a.id.cmp(&b.id)));
    let mut next = 0;
    let mut level = 0.0;
    let mut steps = 0.0;
    let mut t_prev = 0.0;
    for (p, &k) in positions.iter().enumerate() {
        let t = grid_time(tape, k);
        let dt = (t - t_prev).max(0.0);
        if dt > 0.0 {
            level += diff_sd * dt.sqrt() * normal(&mut rng);
        }
        while next < informed.len() && informed[next].start_time <= t {
            let m = informed[next];
            steps += c * m.sign as f64 * m.child_volume.powf(params.psi);
            next += 1;
        }
        out[p] = level + steps;
        t_prev = t;
    }
    Ok(out)
}
