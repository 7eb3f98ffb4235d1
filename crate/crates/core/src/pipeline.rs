//! simulate → analyze → predict → report, as library calls. The CLI is a
//! thin wrapper around these.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::estimators::{
    aggregated_impact_curve, collapse_exponents, correlation_surface, covariance_surface,
    default_chi_grid, generalized_imbalance, linear_regression, moment_surface, price_moments,
    scan_collapse, sign_autocorrelation_by_volume_bin, AutocorrOptions, BinCorrelation,
    CollapseScan, ExponentFit, FitOptions, ImpactCurve, Realization, ScalingSurface,
};
use crate::flow::{flow_statistics, simulate_tape_with, Metaorder, TradeTape};
use crate::io::{self, fmt_f64, ExponentRow, MeasuredRow};
use crate::oracle::{self, PredictionRow, PredictionSet};
use crate::par::{self, Execution};
use crate::params::PropagatorMode;
use crate::price::{assemble_price_path_with, ImpactModel, ObservationGrid, PricePath};
use crate::report::{self, Provenance, ReportBundle};
use crate::rng::realization_seed;

/// One realization: a tape and, when available, its price path.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub tape: TradeTape,
    pub price: Option<PricePath>,
}

pub fn provenance(cfg: &RunConfig) -> Provenance {
    Provenance::new(Some(cfg.model.seed), Some(cfg.hash()))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// The configured price grid, refined so that every analysis window starts
/// and ends on an observed position.
pub fn analysis_price_grid(cfg: &RunConfig) -> ObservationGrid {
    match &cfg.price_grid {
        ObservationGrid::Regular { step } => {
            let mut g = *step;
            for t in cfg
                .t_values()
                .into_iter()
                .chain(cfg.collapse_t.iter().copied())
                .chain([cfg.reference_t])
            {
                g = gcd(g, t as u64);
            }
            ObservationGrid::Regular { step: g.max(1) }
        }
        other => other.clone(),
    }
}

/// Realization `k`: its seed is derived from the master seed, so samples
/// are independent of how many are drawn and in which order.
pub fn simulate_sample(
    cfg: &RunConfig,
    k: usize,
    grid: &ObservationGrid,
    exec: Execution,
) -> Result<Sample> {
    let seed = realization_seed(cfg.model.seed, k as u64);
    let tape = simulate_tape_with(&cfg.model, cfg.horizon_trades, seed, exec)?;
    let price = assemble_price_path_with(&tape, &cfg.model, cfg.model.mode, grid, seed, exec)?;
    Ok(Sample {
        tape,
        price: Some(price),
    })
}

/// All realizations of a config, run in parallel across realizations.
pub fn simulate_samples(cfg: &RunConfig, exec: Execution) -> Result<Vec<Sample>> {
    let grid = analysis_price_grid(cfg);
    par::map_range(exec, cfg.n_realizations, |k| {
        simulate_sample(cfg, k, &grid, Execution::Sequential)
    })
    .into_iter()
    .collect()
}

/// Realizations without price paths, for analyses of the order flow
/// alone.
pub fn simulate_tapes(cfg: &RunConfig, exec: Execution) -> Result<Vec<Sample>> {
    par::map_range(exec, cfg.n_realizations, |k| {
        let seed = realization_seed(cfg.model.seed, k as u64);
        simulate_tape_with(&cfg.model, cfg.horizon_trades, seed, Execution::Sequential)
            .map(|tape| Sample { tape, price: None })
    })
    .into_iter()
    .collect()
}

/// Tape file names for `n` realizations written under `out`.
pub fn tape_paths(out: &Path, n: usize) -> Vec<PathBuf> {
    if n == 1 {
        vec![out.to_path_buf()]
    } else {
        (0..n)
            .map(|k| out.join(format!("tape_{k:03}.csv")))
            .collect()
    }
}

/// Simulates every realization and writes it with a per-trade price
/// column. One realization goes to `out` itself; several go into the
/// directory `out`.
pub fn simulate_to_files(cfg: &RunConfig, out: &Path, exec: Execution) -> Result<Vec<PathBuf>> {
    let paths = tape_paths(out, cfg.n_realizations);
    if cfg.n_realizations > 1 {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    }
    let hash = cfg.hash();
    let every_trade = ObservationGrid::Regular { step: 1 };
    for (k, path) in paths.iter().enumerate() {
        let Sample { mut tape, price } = simulate_sample(cfg, k, &every_trade, exec)?;
        let price = price.expect("simulated samples carry prices");
        tape.price = Some(price.total[..tape.len()].to_vec());
        io::write_tape_csv_with(&tape, path, Some(&hash))?;
    }
    Ok(paths)
}

/// Reads a tape file, or every `*.csv` tape in a directory (sidecars
/// excluded), sorted by name. A separate price file applies to a single
/// tape only.
pub fn load_samples(tape: &Path, price: Option<&Path>) -> Result<Vec<Sample>> {
    let files: Vec<PathBuf> = if tape.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(tape)
            .map_err(|e| Error::io(tape, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                let name = p.file_name().and_then(|s| s.to_str()).unwrap_or("");
                name.ends_with(".csv") && !name.ends_with(".metaorders.csv")
            })
            .collect();
        v.sort();
        v
    } else {
        vec![tape.to_path_buf()]
    };
    if files.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no tapes in {}",
            tape.display()
        )));
    }
    if price.is_some() && files.len() > 1 {
        return Err(Error::config("price", "a price file needs a single tape"));
    }
    files
        .iter()
        .map(|f| {
            let tape = io::read_tape_csv(f)?;
            let price = match price {
                Some(p) => Some(io::read_price_csv(p, &tape)?),
                None => PricePath::from_trade_prices(&tape),
            };
            Ok(Sample { tape, price })
        })
        .collect()
}

/// Everything `analyze` measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub moments: Vec<ScalingSurface>,
    pub kurtosis: ScalingSurface,
    pub price_moments: Vec<ScalingSurface>,
    pub covariance: Option<ScalingSurface>,
    pub correlation: Option<ScalingSurface>,
    pub exponents: Vec<ExponentRow>,
    pub measured: Vec<MeasuredRow>,
    pub autocorr: Vec<BinCorrelation>,
    pub collapse: Option<CollapseScan>,
    pub impact_curves: Vec<ImpactCurve>,
}

impl Analysis {
    pub fn measured(
        &self,
        statistic: &str,
        a: Option<f64>,
        n: Option<u32>,
    ) -> Option<&MeasuredRow> {
        self.measured.iter().find(|m| {
            m.statistic == statistic
                && m.n == n
                && match (m.a, a) {
                    (None, None) => true,
                    (Some(x), Some(y)) => (x - y).abs() < 1e-9,
                    _ => false,
                }
        })
    }

    pub fn exponent(
        &self,
        statistic: &str,
        a: Option<f64>,
        n: Option<u32>,
    ) -> Option<&ExponentFit> {
        self.exponents
            .iter()
            .find(|e| {
                e.statistic == statistic
                    && e.n == n
                    && match (e.a, a) {
                        (None, None) => true,
                        (Some(x), Some(y)) => (x - y).abs() < 1e-9,
                        _ => false,
                    }
            })
            .map(|e| &e.fit)
    }
}

struct Collector {
    exponents: Vec<ExponentRow>,
    measured: Vec<MeasuredRow>,
}

impl Collector {
    fn fit(&mut self, statistic: &str, a: Option<f64>, n: Option<u32>, fit: Option<ExponentFit>) {
        if let Some(fit) = fit {
            self.exponents.push(ExponentRow {
                statistic: statistic.to_string(),
                a,
                n,
                fit,
            });
            self.measured.push(MeasuredRow::new(
                statistic,
                a,
                n,
                fit.exponent,
                fit.exponent_stderr,
            ));
        }
    }

    fn value(&mut self, statistic: &str, a: Option<f64>, n: Option<u32>, value: f64, stderr: f64) {
        self.measured
            .push(MeasuredRow::new(statistic, a, n, value, stderr));
    }
}

/// Slope of y against x with its standard error; needs three points.
fn slope(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 3 {
        return None;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let (_, b, se, _) = linear_regression(&x, &y);
    b.is_finite().then_some((b, se))
}

/// Breakpoint of a decreasing-then-flat curve: least squares of
/// y = c + b·min(x, x_k) with x_k scanned between the second and the
/// second-to-last point. `None` without a decreasing branch.
fn crossover(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 4 {
        return None;
    }
    let lo = points[1].0;
    let hi = points[points.len() - 2].0;
    let steps = ((hi - lo) / 0.01).round() as usize;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=steps {
        let k = lo + (hi - lo) * i as f64 / steps.max(1) as f64;
        let x: Vec<f64> = points.iter().map(|p| p.0.min(k)).collect();
        let y: Vec<f64> = points.iter().map(|p| p.1).collect();
        let (c, b, _, _) = linear_regression(&x, &y);
        if !(b < 0.0) {
            continue;
        }
        let sse: f64 = x.iter().zip(&y).map(|(x, y)| (y - c - b * x).powi(2)).sum();
        if best.is_none_or(|(_, s)| sse < s) {
            best = Some((k, sse));
        }
    }
    best.map(|(k, _)| k)
}

fn usable_windows(samples: &[Sample], t_grid: &[usize]) -> Vec<usize> {
    t_grid
        .iter()
        .copied()
        .filter(|&t| samples.iter().map(|s| s.tape.len() / t).sum::<usize>() >= 10)
        .collect()
}

fn nearest(grid: &[usize], target: usize) -> Option<usize> {
    grid.iter().copied().min_by(|&x, &y| {
        let dx = (x as f64 / target as f64).ln().abs();
        let dy = (y as f64 / target as f64).ln().abs();
        dx.total_cmp(&dy)
    })
}

/// Location of the maximum of a sampled curve, refined by a parabola
/// through the best point and its neighbours.
fn argmax_refined(x: &[f64], y: &[f64]) -> Option<f64> {
    let k = (0..y.len())
        .filter(|&i| y[i].is_finite())
        .max_by(|&i, &j| y[i].total_cmp(&y[j]))?;
    if k == 0 || k + 1 >= y.len() || !y[k - 1].is_finite() || !y[k + 1].is_finite() {
        return Some(x[k]);
    }
    let (x0, x1, x2) = (x[k - 1], x[k], x[k + 1]);
    let (y0, y1, y2) = (y[k - 1], y[k], y[k + 1]);
    let den = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / den;
    if a < 0.0 {
        Some((-b / (2.0 * a)).clamp(x0, x2))
    } else {
        Some(x1)
    }
}

pub fn analyze(cfg: &RunConfig, samples: &[Sample], exec: Execution) -> Result<Analysis> {
    if samples.is_empty() {
        return Err(Error::EmptyTape);
    }
    let fit = FitOptions {
        with_offset: cfg.fit_offset,
        range: Some((cfg.fit_range[0], cfg.fit_range[1])),
    };
    let a_grid = cfg.a_values();
    let t_grid = usable_windows(samples, &cfg.t_values());
    if t_grid.len() < 2 {
        return Err(Error::InsufficientData(
            "tapes are too short for two window sizes".into(),
        ));
    }
    let clipped: Vec<TradeTape> = match cfg.clip_fraction {
        Some(f) => samples
            .iter()
            .map(|s| crate::estimators::clip_volumes(&s.tape, f, cfg.day_block))
            .collect::<Result<_>>()?,
        None => samples.iter().map(|s| s.tape.clone()).collect(),
    };
    let reals: Vec<Realization> = clipped
        .iter()
        .zip(samples)
        .map(|(t, s)| Realization::new(t, s.price.as_ref()))
        .collect();
    let have_prices = samples.iter().all(|s| s.price.is_some());
    let mut c = Collector {
        exponents: Vec::new(),
        measured: Vec::new(),
    };

    let m = moment_surface(&reals, &t_grid, &a_grid, &cfg.moment_orders, fit, exec)?;
    for (oi, &n) in m.orders.iter().enumerate() {
        for (ai, &a) in a_grid.iter().enumerate() {
            c.fit("sigma2_exponent", Some(a), Some(n), m.fits[oi][ai]);
        }
    }
    let kurtosis_fits = match cfg.kurtosis_fit_range {
        Some([lo, hi]) => m.kurtosis.fit_columns(FitOptions {
            range: Some((lo, hi)),
            ..fit
        }),
        None => m.kurtosis_fits.clone(),
    };
    for (ai, &a) in a_grid.iter().enumerate() {
        c.fit("kurtosis_exponent", Some(a), None, kurtosis_fits[ai]);
    }
    if let (Some(ai), Some(t)) = (m.kurtosis.a_index(0.0), nearest(&t_grid, 1000)) {
        let ti = m.kurtosis.t_index(t).expect("t on grid");
        c.value(
            "excess_kurtosis",
            Some(0.0),
            None,
            m.excess_kurtosis[ti][ai],
            f64::NAN,
        );
    }
    if let Some(oi) = m.orders.iter().position(|&n| n == 1) {
        let ac = oracle::a_c(&cfg.model, 1);
        let pts: Vec<(f64, f64)> = a_grid
            .iter()
            .zip(&m.fits[oi])
            .filter(|(a, _)| **a < ac)
            .filter_map(|(a, f)| f.map(|f| (*a, f.exponent)))
            .collect();
        if let Some((b, se)) = slope(&pts) {
            c.value("sigma2_slope", None, Some(1), b, se);
        }
    }
    for (oi, &n) in m.orders.iter().enumerate() {
        let pts: Vec<(f64, f64)> = a_grid
            .iter()
            .zip(&m.fits[oi])
            .filter_map(|(a, f)| f.map(|f| (*a, f.exponent)))
            .collect();
        if let Some(k) = crossover(&pts) {
            c.value("a_c", None, Some(n), k, f64::NAN);
        }
    }

    let mut collapse = None;
    let collapse_t = usable_windows(samples, &cfg.collapse_t);
    if collapse_t.len() >= 2 {
        let series: Vec<(usize, Vec<f64>)> = collapse_t
            .iter()
            .map(|&t| {
                let mut v = Vec::new();
                for r in &reals {
                    v.extend(generalized_imbalance(r.tape, t, 0.0)?.values);
                }
                Ok((t, v))
            })
            .collect::<Result<_>>()?;
        let scan = scan_collapse(&series, &default_chi_grid())?;
        c.value("chi", None, None, scan.best_chi, f64::NAN);
        c.value("collapse_ks", None, None, scan.best_ks, f64::NAN);
        let ce = collapse_exponents(&reals, &collapse_t, 0.0, &default_chi_grid())?;
        c.value("omega", None, None, ce.omega, f64::NAN);
        if let Some(w) = ce.omega_naive {
            c.value("omega_naive", None, None, w, f64::NAN);
        }
        collapse = Some(scan);
    }

    // sign memory is read on the unclipped, concatenated tapes
    let joined = TradeTape::from_signs_volumes(
        samples
            .iter()
            .flat_map(|s| s.tape.sign.iter().copied())
            .collect(),
        samples
            .iter()
            .flat_map(|s| s.tape.volume.iter().copied())
            .collect(),
    )?;
    let autocorr = sign_autocorrelation_by_volume_bin(
        &joined,
        cfg.volume_bins,
        AutocorrOptions {
            day_block: cfg.day_block,
            ..AutocorrOptions::default()
        },
    )?;
    let pts: Vec<(f64, f64)> = autocorr
        .iter()
        .filter(|b| b.reliable && !b.largest)
        .filter_map(|b| b.gamma.map(|g| (b.center_volume.ln(), g)))
        .collect();
    if pts.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
        let (a0, a1, se, _) = linear_regression(&x, &y);
        c.value("sign_gamma_slope", None, None, a1, se);
        c.value("sign_gamma_intercept", None, None, a0, f64::NAN);
    }

    let mut price_surfaces = Vec::new();
    let mut covariance = None;
    let mut correlation = None;
    let mut impact_curves = Vec::new();
    if have_prices {
        let (surfaces, fits) = price_moments(&reals, &t_grid, &cfg.moment_orders, fit, exec)?;
        for (&n, f) in cfg.moment_orders.iter().zip(&fits) {
            if n == 1 {
                c.fit("price_variance_exponent", None, Some(1), *f);
            }
            c.fit("zeta", None, Some(n), *f);
        }
        price_surfaces = surfaces;

        let (cov, fits) = covariance_surface(&reals, &t_grid, &a_grid, fit, exec)?;
        for (&a, f) in a_grid.iter().zip(&fits) {
            c.fit("covariance_exponent", Some(a), None, *f);
        }
        covariance_slopes(cfg, &a_grid, &fits, &mut c);
        covariance = Some(cov);

        let mut corr_t = t_grid.clone();
        if !corr_t.contains(&cfg.reference_t)
            && usable_windows(samples, &[cfg.reference_t]).len() == 1
        {
            corr_t.push(cfg.reference_t);
            corr_t.sort_unstable();
        }
        let corr = correlation_surface(&reals, &corr_t, &a_grid, exec)?;
        for (&a, f) in a_grid.iter().zip(corr.fit_columns(fit)) {
            c.fit("correlation_exponent", Some(a), None, f);
        }
        correlation_ratios(cfg, &corr, &mut c);
        correlation = Some(corr);

        for &t in &collapse_t {
            for a in [0.0, 1.0] {
                impact_curves.push(aggregated_impact_curve(&reals, t, a, 20)?);
            }
        }
    }

    flow_rows(samples, &mut c)?;

    Ok(Analysis {
        moments: m.moments,
        kurtosis: m.kurtosis,
        price_moments: price_surfaces,
        covariance,
        correlation,
        exponents: c.exponents,
        measured: c.measured,
        autocorr,
        collapse,
        impact_curves,
    })
}

/// Slopes of the covariance exponent against a on either side of its
/// minimum. The right branch stops where β_q saturates at zero.
fn covariance_slopes(
    cfg: &RunConfig,
    a_grid: &[f64],
    fits: &[Option<ExponentFit>],
    c: &mut Collector,
) {
    let pts: Vec<(f64, f64)> = a_grid
        .iter()
        .zip(fits)
        .filter_map(|(a, f)| f.map(|f| (*a, f.exponent)))
        .collect();
    let Some(&(a_min, _)) = pts.iter().min_by(|x, y| x.1.total_cmp(&y.1)) else {
        return;
    };
    let p = &cfg.model;
    let a_sat = if p.lambda_prime > 0.0 && p.sigma_logq > 0.0 {
        p.beta1 / (p.lambda_prime * p.sigma_logq * p.sigma_logq) - 0.5
    } else {
        f64::INFINITY
    };
    let left: Vec<(f64, f64)> = pts.iter().copied().filter(|q| q.0 <= a_min).collect();
    let right: Vec<(f64, f64)> = pts
        .iter()
        .copied()
        .filter(|q| q.0 >= a_min && q.0 <= a_sat + 1e-9)
        .collect();
    c.value("covariance_a_min", None, None, a_min, f64::NAN);
    if let Some((b, se)) = slope(&left) {
        c.value("covariance_slope_left", None, None, b, se);
    }
    if let Some((b, se)) = slope(&right) {
        c.value("covariance_slope_right", None, None, b, se);
    }
}

fn correlation_ratios(cfg: &RunConfig, corr: &ScalingSurface, c: &mut Collector) {
    let Some(ti) = corr.t_index(cfg.reference_t) else {
        return;
    };
    let at = |a: f64| {
        corr.a_index(a)
            .map(|ai| (corr.value[ti][ai], corr.stderr[ti][ai]))
    };
    let ratio = |num: (f64, f64), den: (f64, f64)| {
        let r = num.0 / den.0;
        let se = r.abs() * ((num.1 / num.0).powi(2) + (den.1 / den.0).powi(2)).sqrt();
        (r, se)
    };
    if let Some(r0) = at(0.0) {
        if let Some(rh) = at(0.5) {
            let (r, se) = ratio(rh, r0);
            c.value("ratio_half", None, None, r, se);
        }
        if let Some(r1) = at(1.0) {
            let (r, se) = ratio(r1, r0);
            c.value("ratio_one", None, None, r, se);
        }
    }
    if let Some(a) = argmax_refined(&corr.a_grid, &corr.value[ti]) {
        c.value("a_star", None, None, a, f64::NAN);
    }
}

fn flow_rows(samples: &[Sample], c: &mut Collector) -> Result<()> {
    let stats: Vec<_> = samples
        .iter()
        .map(|s| flow_statistics(&s.tape))
        .collect::<Result<_>>()?;
    let k = stats.len() as f64;
    let spread = |xs: &[f64]| {
        if xs.len() < 2 {
            return f64::NAN;
        }
        let m = xs.iter().sum::<f64>() / k;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0);
        (v / k).sqrt()
    };
    let nus: Vec<f64> = stats.iter().filter_map(|s| s.nu.map(|e| e.value)).collect();
    if nus.len() == stats.len() {
        c.value(
            "initiation_rate",
            None,
            None,
            nus.iter().sum::<f64>() / k,
            spread(&nus),
        );
    }
    let rates: Vec<f64> = stats.iter().map(|s| s.trade_rate).collect();
    let flows: Vec<f64> = stats.iter().map(|s| s.volume_flow).collect();
    c.value(
        "trade_rate",
        None,
        None,
        rates.iter().sum::<f64>() / k,
        spread(&rates),
    );
    c.value(
        "volume_flow",
        None,
        None,
        flows.iter().sum::<f64>() / k,
        spread(&flows),
    );
    let active: Vec<_> = stats.iter().filter_map(|s| s.active_mean).collect();
    if active.len() == stats.len() {
        let m = active.iter().map(|e| e.value).sum::<f64>() / k;
        let se = active
            .iter()
            .map(|e| e.stderr * e.stderr)
            .sum::<f64>()
            .sqrt()
            / k;
        c.value("active_mean", None, None, m, se);
    }
    Ok(())
}

/// File names inside an analysis directory.
pub mod files {
    pub const MOMENTS: &str = "moments.csv";
    pub const PRICE_MOMENTS: &str = "price_moments.csv";
    pub const COVARIANCE: &str = "covariance.csv";
    pub const CORRELATION: &str = "correlation.csv";
    pub const EXPONENTS: &str = "exponents.csv";
    pub const MEASURED: &str = "measured.csv";
    pub const AUTOCORR: &str = "autocorr.csv";
    pub const AUTOCORR_BINS: &str = "autocorr_bins.csv";
    pub const COLLAPSE: &str = "collapse.csv";
    pub const IMPACT_CURVE: &str = "impact_curve.csv";
    pub const PROVENANCE: &str = "provenance.json";
}

pub const AUTOCORR_HEADER: [&str; 3] = ["bin", "lag", "correlation"];
pub const AUTOCORR_BINS_HEADER: [&str; 10] = [
    "bin",
    "lo",
    "hi",
    "center",
    "center_volume",
    "n_trades",
    "gamma",
    "gamma_stderr",
    "reliable",
    "largest",
];
pub const COLLAPSE_HEADER: [&str; 2] = ["chi", "ks"];
pub const IMPACT_CURVE_HEADER: [&str; 6] = ["T", "a", "imbalance", "mean_delta", "stderr", "count"];
pub const TRAJECTORY_HEADER: [&str; 3] = ["mode", "t", "impact"];

pub fn write_analysis(analysis: &Analysis, dir: &Path, provenance: &Provenance) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut moments = analysis.moments.clone();
    moments.push(analysis.kurtosis.clone());
    io::write_surfaces_csv(&moments, &dir.join(files::MOMENTS))?;
    if !analysis.price_moments.is_empty() {
        io::write_surfaces_csv(&analysis.price_moments, &dir.join(files::PRICE_MOMENTS))?;
    }
    if let Some(s) = &analysis.covariance {
        io::write_surfaces_csv(std::slice::from_ref(s), &dir.join(files::COVARIANCE))?;
    }
    if let Some(s) = &analysis.correlation {
        io::write_surfaces_csv(std::slice::from_ref(s), &dir.join(files::CORRELATION))?;
    }
    io::write_exponents_csv(&analysis.exponents, &dir.join(files::EXPONENTS))?;
    io::write_measured_csv(&analysis.measured, &dir.join(files::MEASURED))?;

    let mut rows = Vec::new();
    let mut bins = Vec::new();
    for b in &analysis.autocorr {
        for (lag, r) in b.lags.iter().zip(&b.correlation) {
            rows.push(vec![b.index.to_string(), fmt_f64(*lag), fmt_f64(*r)]);
        }
        bins.push(vec![
            b.index.to_string(),
            fmt_f64(b.lo),
            fmt_f64(b.hi),
            fmt_f64(b.center),
            fmt_f64(b.center_volume),
            b.n_trades.to_string(),
            io::fmt_opt_f64(b.gamma),
            io::fmt_opt_f64(b.fit.map(|f| f.exponent_stderr)),
            b.reliable.to_string(),
            b.largest.to_string(),
        ]);
    }
    io::write_table_csv(&AUTOCORR_HEADER, &rows, &dir.join(files::AUTOCORR))?;
    io::write_table_csv(
        &AUTOCORR_BINS_HEADER,
        &bins,
        &dir.join(files::AUTOCORR_BINS),
    )?;
    if let Some(s) = &analysis.collapse {
        let rows: Vec<Vec<String>> = s
            .chi_grid
            .iter()
            .zip(&s.ks)
            .map(|(x, k)| vec![fmt_f64(*x), fmt_f64(*k)])
            .collect();
        io::write_table_csv(&COLLAPSE_HEADER, &rows, &dir.join(files::COLLAPSE))?;
    }
    if !analysis.impact_curves.is_empty() {
        let mut rows = Vec::new();
        for c in &analysis.impact_curves {
            for i in 0..c.count.len() {
                rows.push(vec![
                    c.t.to_string(),
                    fmt_f64(c.a),
                    fmt_f64(c.imbalance[i]),
                    fmt_f64(c.mean_delta[i]),
                    fmt_f64(c.stderr[i]),
                    c.count[i].to_string(),
                ]);
            }
        }
        io::write_table_csv(&IMPACT_CURVE_HEADER, &rows, &dir.join(files::IMPACT_CURVE))?;
    }
    provenance.write(&dir.join(files::PROVENANCE))
}

/// Predictions for a config, at the configured a grid and reference window.
pub fn predict(cfg: &RunConfig) -> Result<PredictionSet> {
    PredictionSet::new(&cfg.model, &cfg.a_values(), cfg.reference_t as f64)
}

/// Impact of one median-sized metaorder under each propagator mode, on a
/// log grid in time since its start.
pub fn impact_trajectories(cfg: &RunConfig) -> Result<Vec<Vec<String>>> {
    let p = &cfg.model;
    let m = Metaorder {
        id: 0,
        start_time: 0.0,
        sign: 1,
        child_volume: p.m_logq.exp(),
        duration: 100.0 * p.s0,
        participation: p.phi_child,
    };
    let mut rows = Vec::new();
    for (name, mode) in [
        ("standard", PropagatorMode::Standard),
        ("two_time", PropagatorMode::TwoTime),
        ("permanent", PropagatorMode::Permanent),
    ] {
        let model = ImpactModel::new(p, mode)?;
        for k in 0..=60 {
            let t = m.duration * 10f64.powf(-2.0 + k as f64 / 15.0);
            rows.push(vec![
                name.to_string(),
                fmt_f64(t),
                fmt_f64(model.value(&m, t)?),
            ]);
        }
    }
    Ok(rows)
}

/// `<stem>.trajectories.csv` next to a predictions file.
pub fn trajectory_path(pred: &Path) -> PathBuf {
    let stem = pred
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "pred".into());
    pred.with_file_name(format!("{stem}.trajectories.csv"))
}

/// Writes the prediction rows, the trajectory sidecar and provenance.
pub fn write_predictions(cfg: &RunConfig, out: &Path) -> Result<Vec<PredictionRow>> {
    let set = predict(cfg)?;
    let rows = set.rows();
    io::write_predictions_csv(&rows, out)?;
    io::write_table_csv(
        &TRAJECTORY_HEADER,
        &impact_trajectories(cfg)?,
        &trajectory_path(out),
    )?;
    provenance(cfg).write(&io::sidecar_paths(out).1)?;
    Ok(rows)
}

/// Builds the report from an analysis directory and a predictions file.
pub fn report_from_files(measured_dir: &Path, pred: &Path) -> Result<ReportBundle> {
    let measured = io::read_measured_csv(&measured_dir.join(files::MEASURED))?;
    let predictions = io::read_predictions_csv(pred)?;
    let read_prov = |p: PathBuf| {
        if p.exists() {
            Provenance::read(&p).map(Some)
        } else {
            Ok(None)
        }
    };
    let mp = read_prov(measured_dir.join(files::PROVENANCE))?;
    let pp = read_prov(io::sidecar_paths(pred).1)?;
    Ok(report::build_report(&measured, &predictions, mp, pp))
}

/// simulate → analyze → predict → report in memory.
pub fn run(cfg: &RunConfig, exec: Execution) -> Result<(Analysis, ReportBundle)> {
    let samples = simulate_samples(cfg, exec)?;
    let analysis = analyze(cfg, &samples, exec)?;
    let predictions = predict(cfg)?.rows();
    let prov = provenance(cfg);
    let report = report::build_report(
        &analysis.measured,
        &predictions,
        Some(prov.clone()),
        Some(prov),
    );
    Ok((analysis, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_refined_to_window_gcd() {
        let cfg = RunConfig::default();
        assert_eq!(
            analysis_price_grid(&cfg),
            ObservationGrid::Regular { step: 4 }
        );
    }

    #[test]
    fn hinge_breakpoint() {
        let pts: Vec<(f64, f64)> = (0..13)
            .map(|i| {
                let a = i as f64 * 0.25;
                (a, 1.5 - 0.25 * a.min(2.0))
            })
            .collect();
        assert!((crossover(&pts).unwrap() - 2.0).abs() < 1e-9);
        let flat: Vec<(f64, f64)> = pts.iter().map(|p| (p.0, 1.0)).collect();
        assert_eq!(crossover(&flat), None);
    }

    #[test]
    fn parabola_peak() {
        let x = [0.0, 0.25, 0.5, 0.75, 1.0];
        let y: Vec<f64> = x.iter().map(|a| -(a - 0.4f64).powi(2)).collect();
        assert!((argmax_refined(&x, &y).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn tape_names() {
        let p = tape_paths(Path::new("runs"), 2);
        assert_eq!(p[1], Path::new("runs/tape_001.csv"));
        assert_eq!(tape_paths(Path::new("t.csv"), 1)[0], Path::new("t.csv"));
    }
}
