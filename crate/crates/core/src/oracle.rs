//! Closed-form scaling exponents, crossovers and constants, for comparison
//! with what the estimators measure.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::params::{FlowConstants, ModelParams, PropagatorMode};
use crate::price::{b_beta, ImpactModel};
use crate::quad;

/// Relative tolerance of the C(β, γ) quadrature.
pub const C_TOLERANCE: f64 = 1e-4;

fn lambda_s2(p: &ModelParams) -> f64 {
    p.lambda * p.sigma_logq * p.sigma_logq
}

fn lambda_prime_s2(p: &ModelParams) -> f64 {
    p.lambda_prime * p.sigma_logq * p.sigma_logq
}

/// μ̃(a) = μ_m + 2aλσ², the large-T simplification.
pub fn mu_tilde(p: &ModelParams, a: f64) -> f64 {
    p.mu_m() + 2.0 * a * lambda_s2(p)
}

/// μ̃(a) keeping the λ ln T correction of the Gaussian saddle.
pub fn mu_tilde_corrected(p: &ModelParams, a: f64, t: f64) -> f64 {
    p.mu_m() + lambda_s2(p) * (2.0 * a - 0.5 * p.lambda * t.ln())
}

/// μ̂(a) = μ_m + (a + 1/2)λσ².
pub fn mu_hat(p: &ModelParams, a: f64) -> f64 {
    p.mu_m() + (a + 0.5) * lambda_s2(p)
}

/// β̂(a) = max(0, β_m − (a + 1/2)λ'σ²).
pub fn beta_hat(p: &ModelParams, a: f64) -> f64 {
    (p.beta_m() - (a + 0.5) * lambda_prime_s2(p)).max(0.0)
}

/// a_c(n) = (1 − μ_m/2n)/(λσ²); infinite without volume dependence.
pub fn a_c(p: &ModelParams, n: u32) -> f64 {
    let ls2 = lambda_s2(p);
    if ls2 <= 0.0 {
        return f64::INFINITY;
    }
    (1.0 - p.mu_m() / (2.0 * n as f64)) / ls2
}

fn check_mu_m(p: &ModelParams) -> Result<()> {
    let mu = p.mu_m();
    if !(mu > 1.0 && mu < 2.0) {
        return Err(Error::Domain(format!(
            "scaling predictions need 1 < mu_m < 2, got mu_m = {mu}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaExponent {
    pub a: f64,
    pub n: u32,
    pub diagonal: f64,
    /// Σ_a² off-diagonal exponent 2 − γ_×; only meaningful for Γ > 0.
    pub off_diagonal: f64,
    pub a_c: f64,
    /// Crossover time e^{2σ²a²} beyond which the off-diagonal term wins,
    /// reported for a > a_c(1).
    pub t_cross: Option<f64>,
}

/// Exponent of Σ_a^(2n)(T).
pub fn predict_sigma_a_exponent(p: &ModelParams, a: f64, n: u32) -> Result<SigmaExponent> {
    check_mu_m(p)?;
    if n == 0 {
        return Err(Error::Domain("moment order n must be >= 1".into()));
    }
    let ac = a_c(p, n);
    let diagonal = if a < ac {
        2.0 * n as f64 + 1.0 - p.mu_m() - 2.0 * n as f64 * a * lambda_s2(p)
    } else {
        1.0
    };
    let s2 = p.sigma_logq * p.sigma_logq;
    let t_cross = (a > a_c(p, 1)).then(|| (2.0 * s2 * a * a).exp());
    Ok(SigmaExponent {
        a,
        n,
        diagonal,
        off_diagonal: 2.0 - p.gamma_cross,
        a_c: ac,
        t_cross,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceVarianceExponents {
    pub diagonal: f64,
    pub off_diagonal: f64,
    /// ζ_n for n = 1, 2, 3 under Wick factorization of the off-diagonal term.
    pub zeta: Vec<f64>,
    /// β entering the formulas: β̂(0) with volume fluctuations, else β.
    pub beta_eff: f64,
}

fn impact_beta(p: &ModelParams) -> f64 {
    match p.mode {
        PropagatorMode::Permanent => 0.0,
        _ => p.beta_m(),
    }
}

/// Exponents of E[Δ_T²] and the Wick-moment exponents ζ_n.
pub fn predict_price_variance_exponent(p: &ModelParams) -> PriceVarianceExponents {
    let beta_m = impact_beta(p);
    let (diagonal, off_diagonal, beta_eff) =
        if p.sigma_logq == 0.0 || (p.lambda == 0.0 && p.lambda_prime == 0.0) {
            let gamma = p.mu_m() - 1.0;
            let d = if gamma < 2.0 * beta_m {
                1.0 - gamma
            } else {
                1.0 - 2.0 * beta_m
            };
            (d, 2.0 - p.gamma_cross - 2.0 * beta_m, beta_m)
        } else {
            let lp = if p.mode == PropagatorMode::Permanent {
                0.0
            } else {
                lambda_prime_s2(p)
            };
            (
                1.0 - 2.0 * beta_m + 2.0 * lp,
                2.0 - p.gamma_cross - 2.0 * beta_m + lp,
                beta_m - 0.5 * lp,
            )
        };
    let zeta = (1..=3)
        .map(|n| n as f64 * (2.0 * (1.0 - beta_eff) - p.gamma_cross))
        .collect();
    PriceVarianceExponents {
        diagonal,
        off_diagonal,
        zeta,
        beta_eff,
    }
}

/// a_c′ where the two diagonal branches of the covariance exponent cross.
/// Found by bisection because β̂ may saturate at zero first.
pub fn a_c_prime(p: &ModelParams) -> f64 {
    let gap = |a: f64| (2.5 - mu_hat(p, a)) - (1.0 - beta_hat(p, a));
    if gap(-0.5) <= 0.0 {
        return -0.5;
    }
    let (mut lo, mut hi) = (-0.5, 1.0);
    while gap(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceExponents {
    pub a: f64,
    pub diagonal: f64,
    pub off_diagonal: f64,
    pub informed: f64,
    pub mu_hat: f64,
    pub beta_hat: f64,
}

/// Exponents of E[Δ_T I^a_T] for each contribution.
pub fn predict_covariance_exponent(p: &ModelParams, a: f64) -> CovarianceExponents {
    let mh = mu_hat(p, a);
    let bh = beta_hat(p, a);
    let diagonal = if a < a_c_prime(p) { 2.5 - mh } else { 1.0 - bh };
    CovarianceExponents {
        a,
        diagonal,
        off_diagonal: 2.0 - p.gamma_cross - beta_hat(p, 0.0),
        informed: 1.0,
        mu_hat: mh,
        beta_hat: bh,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationShape {
    pub a: f64,
    pub t: f64,
    /// Exponents of T in R_a(T) for each dominant contribution.
    pub exponent_diagonal: f64,
    pub exponent_off_diagonal: f64,
    pub exponent_informed: f64,
    /// a-dependent prefactors e^{σ²a(1−a)/2} and e^{−σ²a²/2}.
    pub prefactor_diagonal: f64,
    pub prefactor_off_diagonal: f64,
    /// R_{1/2}/R_0 = e^{σ²/8}, the diagonal-dominant ratio.
    pub ratio_half: f64,
    /// R_1/R_0 = e^{σ²(λ ln T − 1/2)}, the off-diagonal-dominant ratio.
    pub ratio_one: f64,
    pub omega_d: f64,
    pub omega_od: f64,
}

/// Shape of the correlation coefficient R_a(T). The diagonal branch switches
/// at a_c′, the informed one at a_c(1).
pub fn predict_correlation_shape(p: &ModelParams, a: f64, t: f64) -> CorrelationShape {
    let s2 = p.sigma_logq * p.sigma_logq;
    let ls2 = lambda_s2(p);
    let mu = p.mu_m();
    let exponent_diagonal = if a < a_c_prime(p) {
        0.5 * (1.0 - mu - ls2)
    } else {
        -beta_hat(p, a)
    };
    let exponent_informed = if a < a_c(p, 1) {
        0.5 * mu + a * ls2 - 1.0
    } else {
        0.0
    };
    CorrelationShape {
        a,
        t,
        exponent_diagonal,
        exponent_off_diagonal: 0.5 * mu + a * ls2 - p.gamma_cross - beta_hat(p, 0.0),
        exponent_informed,
        prefactor_diagonal: (0.5 * s2 * a * (1.0 - a)).exp(),
        prefactor_off_diagonal: (-0.5 * s2 * a * a).exp(),
        ratio_half: (s2 / 8.0).exp(),
        ratio_one: (s2 * (p.lambda * t.ln() - 0.5)).exp(),
        omega_d: omega_d(p),
        omega_od: omega_od(p),
    }
}

/// Two-term template R_a = e^{−σ²a²/2}(A e^{σ²a/2} + B e^{λσ²a ln T}).
pub fn correlation_template(
    sigma2: f64,
    lambda: f64,
    t: f64,
    a: f64,
    amp_a: f64,
    amp_b: f64,
) -> f64 {
    (-0.5 * sigma2 * a * a).exp()
        * (amp_a * (0.5 * sigma2 * a).exp() + amp_b * (lambda * sigma2 * a * t.ln()).exp())
}

/// Naive slope exponent when the diagonal term dominates: (1 + λσ²)/2.
pub fn omega_d(p: &ModelParams) -> f64 {
    0.5 + mu_hat(p, 0.0) - mu_tilde(p, 0.0)
}

/// Naive slope exponent when the off-diagonal term dominates.
pub fn omega_od(p: &ModelParams) -> f64 {
    1.0 - mu_tilde(p, 0.0) + p.gamma_cross + beta_hat(p, 0.0)
}

/// C(β, γ) = ∫₀¹∫₀¹ |y − y′|^{−γ} (y y′)^{−β} dy dy′: the off-diagonal
/// variance prefactor with both trajectories normalized to the window.
///
/// The inner integral is split at y/2 and each half is mapped so that its
/// endpoint singularity becomes a smooth power.
pub fn c_beta_gamma(beta: f64, gamma: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) || !(0.0..1.0).contains(&gamma) || gamma + 2.0 * beta >= 2.0 {
        return Err(Error::Domain(format!(
            "C(beta, gamma) needs 0 <= beta < 1, 0 <= gamma < 1, got ({beta}, {gamma})"
        )));
    }
    let tol = C_TOLERANCE * 1e-2;
    let pb = 1.0 - beta;
    let pg = 1.0 - gamma;
    // ∫₀^y (y − x)^{−γ} x^{−β} dx
    let inner = |y: f64| -> Result<f64> {
        let h = 0.5 * y;
        let left = quad::integrate(
            |t: f64| {
                let x = h * t.powf(1.0 / pb);
                (y - x).powf(-gamma) * h.powf(pb) / pb
            },
            0.0,
            1.0,
            tol,
        )?;
        let right = quad::integrate(
            |t: f64| {
                let d = h * t.powf(1.0 / pg);
                (y - d).powf(-beta) * h.powf(pg) / pg
            },
            0.0,
            1.0,
            tol,
        )?;
        Ok(left + right)
    };
    // outer integrand y^{−β}·inner(y) ~ y^{p−1}; map y = t^{1/p}
    let p = 2.0 - gamma - 2.0 * beta;
    let failure = std::cell::Cell::new(None);
    let outer = quad::integrate(
        |t: f64| {
            if t <= 0.0 {
                return 0.0;
            }
            let y = t.powf(1.0 / p);
            match inner(y) {
                Ok(v) => y.powf(-beta) * v * y.powf(1.0 - p) / p,
                Err(e) => {
                    failure.set(Some(e.to_string()));
                    0.0
                }
            }
        },
        0.0,
        1.0,
        C_TOLERANCE,
    )?;
    if let Some(msg) = failure.take() {
        return Err(Error::Numerical(msg));
    }
    Ok(2.0 * outer)
}

/// ln B(x, y).
fn ln_beta(x: f64, y: f64) -> f64 {
    ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)
}

/// Closed form 2B(1−β, 1−γ)/(2 − γ − 2β) of the same double integral.
pub fn c_beta_gamma_closed(beta: f64, gamma: f64) -> f64 {
    2.0 * ln_beta(1.0 - beta, 1.0 - gamma).exp() / (2.0 - gamma - 2.0 * beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactConstants {
    pub b_beta: f64,
    /// 𝓘₁ at the median volume e^m and the default participation.
    pub i1: f64,
    pub c_beta_gamma: Option<f64>,
    /// n̄^{1/2 − β}/√(CΓ); the √(1 − σ_F²/σ²) factor is left out.
    pub y_core: Option<f64>,
    pub beta_eff: f64,
    pub t_cross_a2: f64,
    pub a_c: Vec<f64>,
    pub a_c_prime: f64,
    /// q where β_q reaches 0.
    pub q0: f64,
    /// q where μ_q = 2.
    pub q2: f64,
    /// q where 5/2 − μ_q = 1 − β_q.
    pub q_c_prime: f64,
    pub s_bar: f64,
    pub n_bar: f64,
    pub phi_flow: f64,
    pub tau0: f64,
    pub chi: f64,
}

/// Constants of the impact and flow model.
pub fn impact_constants(p: &ModelParams) -> Result<ImpactConstants> {
    let flow = p.derived()?;
    let beta_eff = predict_price_variance_exponent(p).beta_eff;
    let model = ImpactModel::new(p, p.mode)?;
    let q_med = p.m_logq.exp();
    let c = c_beta_gamma(beta_eff, p.gamma_cross).ok();
    let y_core = match c {
        Some(c) if p.gamma_amp > 0.0 => {
            Some(flow.n_bar.powf(0.5 - beta_eff) / (c * p.gamma_amp).sqrt())
        }
        _ => None,
    };
    let div = |num: f64, den: f64| {
        if den != 0.0 {
            (num / den).exp()
        } else {
            f64::INFINITY
        }
    };
    let q0 = div(p.beta1, p.lambda_prime);
    let q2 = div(2.0 - p.mu1, p.lambda);
    let q_c_prime = {
        // unsaturated branch first; fall back to β_q = 0 beyond q0
        let l = (1.5 - p.mu1 + p.beta1) / (p.lambda + p.lambda_prime);
        if p.lambda + p.lambda_prime > 0.0 && (p.lambda_prime == 0.0 || l <= q0.ln()) {
            l.exp()
        } else {
            div(1.5 - p.mu1, p.lambda)
        }
    };
    let s2 = p.sigma_logq * p.sigma_logq;
    Ok(ImpactConstants {
        b_beta: b_beta(model.beta(q_med)),
        i1: model.i1(q_med, p.phi_child),
        c_beta_gamma: c,
        y_core,
        beta_eff,
        t_cross_a2: (8.0 * s2).exp(),
        a_c: (1..=3).map(|n| a_c(p, n)).collect(),
        a_c_prime: a_c_prime(p),
        q0,
        q2,
        q_c_prime,
        s_bar: flow.s_bar,
        n_bar: flow.n_bar,
        phi_flow: flow.volume_flow,
        tau0: flow.tau0,
        chi: 1.0 / p.mu_m(),
    })
}

/// One exported prediction; `a` and `n` are absent where they do not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub statistic: String,
    pub a: Option<f64>,
    pub n: Option<u32>,
    pub value: f64,
}

impl PredictionRow {
    fn new(statistic: &str, a: Option<f64>, n: Option<u32>, value: f64) -> Self {
        PredictionRow {
            statistic: statistic.to_string(),
            a,
            n,
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub a_grid: Vec<f64>,
    /// Σ_a^(2n) exponents; empty when μ_m is outside (1, 2).
    pub sigma: Vec<SigmaExponent>,
    pub price_variance: PriceVarianceExponents,
    pub covariance: Vec<CovarianceExponents>,
    /// Correlation shape at the reference window.
    pub correlation: Vec<CorrelationShape>,
    pub reference_t: f64,
    pub constants: ImpactConstants,
    pub flow: FlowConstants,
    pub params: ModelParams,
}

impl PredictionSet {
    pub fn new(p: &ModelParams, a_grid: &[f64], reference_t: f64) -> Result<Self> {
        let mut sigma = Vec::new();
        if check_mu_m(p).is_ok() {
            for &a in a_grid {
                for n in 1..=3 {
                    sigma.push(predict_sigma_a_exponent(p, a, n)?);
                }
            }
        }
        Ok(PredictionSet {
            a_grid: a_grid.to_vec(),
            sigma,
            price_variance: predict_price_variance_exponent(p),
            covariance: a_grid
                .iter()
                .map(|&a| predict_covariance_exponent(p, a))
                .collect(),
            correlation: a_grid
                .iter()
                .map(|&a| predict_correlation_shape(p, a, reference_t))
                .collect(),
            reference_t,
            constants: impact_constants(p)?,
            flow: p.derived()?,
            params: p.clone(),
        })
    }

    fn cross(&self) -> bool {
        self.params.gamma_amp > 0.0
    }

    /// Exponent of E[Δ I^a] that a measurement sees: the largest of the
    /// contributions present in the model.
    fn covariance_effective(&self, c: &CovarianceExponents) -> Option<f64> {
        let p = &self.params;
        let mut best: Option<f64> = None;
        let mut take = |v: f64| best = Some(best.map_or(v, |b: f64| b.max(v)));
        if p.theta0 > 0.0 {
            take(c.diagonal);
            if self.cross() {
                take(c.off_diagonal);
            }
        }
        if p.rho != 0.0 && p.sigma_f > 0.0 {
            take(c.informed);
        }
        best
    }

    /// Flat rows for the `statistic,a,n,value` export. Unsuffixed names are
    /// the exponents a measurement should show for this parameter set;
    /// `_d`, `_od` and `_informed` rows are the individual contributions.
    pub fn rows(&self) -> Vec<PredictionRow> {
        let p = &self.params;
        let s2 = p.sigma_logq * p.sigma_logq;
        let mut r = Vec::new();
        for s in &self.sigma {
            let eff = if s.n == 1 && self.cross() {
                s.diagonal.max(s.off_diagonal)
            } else {
                s.diagonal
            };
            r.push(PredictionRow::new(
                "sigma2_exponent",
                Some(s.a),
                Some(s.n),
                eff,
            ));
            r.push(PredictionRow::new(
                "sigma2_exponent_d",
                Some(s.a),
                Some(s.n),
                s.diagonal,
            ));
            if s.n == 1 {
                r.push(PredictionRow::new(
                    "sigma2_exponent_od",
                    Some(s.a),
                    Some(1),
                    s.off_diagonal,
                ));
                if let Some(t) = s.t_cross {
                    r.push(PredictionRow::new("t_cross", Some(s.a), None, t));
                }
            }
        }
        let at_zero = |n: u32| {
            self.sigma
                .iter()
                .find(|s| s.a == 0.0 && s.n == n)
                .map(|s| s.diagonal)
        };
        if let (Some(e1), Some(e2)) = (at_zero(1), at_zero(2)) {
            if !self.cross() {
                r.push(PredictionRow::new(
                    "kurtosis_exponent",
                    Some(0.0),
                    None,
                    e2 - 2.0 * e1,
                ));
            }
        }
        if !self.sigma.is_empty() && lambda_s2(p) > 0.0 {
            r.push(PredictionRow::new(
                "sigma2_slope",
                None,
                Some(1),
                -2.0 * lambda_s2(p),
            ));
        }

        let pv = &self.price_variance;
        let pv_eff = if self.cross() {
            pv.diagonal.max(pv.off_diagonal)
        } else {
            pv.diagonal
        };
        r.push(PredictionRow::new(
            "price_variance_exponent",
            None,
            Some(1),
            pv_eff,
        ));
        r.push(PredictionRow::new(
            "price_variance_exponent_d",
            None,
            Some(1),
            pv.diagonal,
        ));
        r.push(PredictionRow::new(
            "price_variance_exponent_od",
            None,
            Some(1),
            pv.off_diagonal,
        ));
        if self.cross() {
            for (i, z) in pv.zeta.iter().enumerate() {
                r.push(PredictionRow::new("zeta", None, Some(i as u32 + 1), *z));
            }
        } else {
            r.push(PredictionRow::new("zeta", None, Some(1), pv_eff));
        }

        for c in &self.covariance {
            let a = Some(c.a);
            if let Some(e) = self.covariance_effective(c) {
                r.push(PredictionRow::new("covariance_exponent", a, None, e));
            }
            r.push(PredictionRow::new(
                "covariance_exponent_d",
                a,
                None,
                c.diagonal,
            ));
            r.push(PredictionRow::new(
                "covariance_exponent_od",
                a,
                None,
                c.off_diagonal,
            ));
            r.push(PredictionRow::new(
                "covariance_exponent_informed",
                a,
                None,
                c.informed,
            ));
            r.push(PredictionRow::new("mu_hat", a, None, c.mu_hat));
            r.push(PredictionRow::new("beta_hat", a, None, c.beta_hat));
        }
        if p.theta0 > 0.0 && !self.cross() && s2 > 0.0 {
            if p.lambda > 0.0 {
                r.push(PredictionRow::new(
                    "covariance_slope_left",
                    None,
                    None,
                    -lambda_s2(p),
                ));
            }
            if p.lambda_prime > 0.0 && p.mode != PropagatorMode::Permanent {
                r.push(PredictionRow::new(
                    "covariance_slope_right",
                    None,
                    None,
                    lambda_prime_s2(p),
                ));
            }
        }

        for c in &self.correlation {
            let a = Some(c.a);
            r.push(PredictionRow::new(
                "correlation_exponent",
                a,
                None,
                c.exponent_diagonal,
            ));
            r.push(PredictionRow::new(
                "correlation_exponent_od",
                a,
                None,
                c.exponent_off_diagonal,
            ));
            r.push(PredictionRow::new(
                "correlation_exponent_informed",
                a,
                None,
                c.exponent_informed,
            ));
            r.push(PredictionRow::new(
                "correlation_prefactor",
                a,
                None,
                c.prefactor_diagonal,
            ));
            r.push(PredictionRow::new(
                "correlation_prefactor_od",
                a,
                None,
                c.prefactor_off_diagonal,
            ));
        }
        if let Some(c) = self.correlation.first() {
            // each ratio belongs to one regime only
            if self.cross() {
                r.push(PredictionRow::new("ratio_one", None, None, c.ratio_one));
            } else if p.theta0 > 0.0 {
                r.push(PredictionRow::new("ratio_half", None, None, c.ratio_half));
                if s2 > 0.0 {
                    r.push(PredictionRow::new("a_star", None, None, 0.5));
                }
            }
            r.push(PredictionRow::new("omega_d", None, None, c.omega_d));
            r.push(PredictionRow::new("omega_od", None, None, c.omega_od));
        }
        if s2 > 0.0 {
            r.push(PredictionRow::new("sign_gamma_slope", None, None, p.lambda));
            r.push(PredictionRow::new(
                "sign_gamma_intercept",
                None,
                None,
                p.mu1 - 1.0,
            ));
        }
        let f = &self.flow;
        r.push(PredictionRow::new("initiation_rate", None, None, p.nu));
        r.push(PredictionRow::new("trade_rate", None, None, f.trade_rate));
        r.push(PredictionRow::new("active_mean", None, None, f.active_mean));
        r.push(PredictionRow::new("volume_flow", None, None, f.volume_flow));
        let k = &self.constants;
        r.push(PredictionRow::new("b_beta", None, None, k.b_beta));
        r.push(PredictionRow::new("i1", None, None, k.i1));
        if let Some(c) = k.c_beta_gamma {
            r.push(PredictionRow::new("c_beta_gamma", None, None, c));
        }
        if let Some(y) = k.y_core {
            r.push(PredictionRow::new("y_core", None, None, y));
        }
        for (i, v) in k.a_c.iter().enumerate() {
            r.push(PredictionRow::new("a_c", None, Some(i as u32 + 1), *v));
        }
        for (name, v) in [
            ("a_c_prime", k.a_c_prime),
            ("t_cross_a2", k.t_cross_a2),
            ("q0", k.q0),
            ("q2", k.q2),
            ("q_c_prime", k.q_c_prime),
            ("s_bar", k.s_bar),
            ("n_bar", k.n_bar),
            ("phi_flow", k.phi_flow),
            ("tau0", k.tau0),
            ("chi", k.chi),
        ] {
            r.push(PredictionRow::new(name, None, None, v));
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lognormal() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn sigma_examples() {
        let p = lognormal();
        assert_eq!(predict_sigma_a_exponent(&p, 0.0, 1).unwrap().diagonal, 1.5);
        assert_eq!(predict_sigma_a_exponent(&p, 1.0, 1).unwrap().diagonal, 1.25);
        assert_eq!(predict_sigma_a_exponent(&p, 2.0, 1).unwrap().diagonal, 1.0);
        assert_eq!(a_c(&p, 1), 2.0);
    }

    #[test]
    fn a_c_prime_defaults() {
        // 5/2 − μ̂ = 1 − β̂  ⇔  1 − 0.125x = 0.725 + 0.15x with x = a + 1/2
        let ac = a_c_prime(&lognormal());
        assert!((ac - 0.5).abs() < 1e-12, "{ac}");
    }

    #[test]
    fn c_matches_closed_form() {
        let c = c_beta_gamma(0.2, 0.6).unwrap();
        let exact = c_beta_gamma_closed(0.2, 0.6);
        assert!((c / exact - 1.0).abs() < C_TOLERANCE, "{c} vs {exact}");
    }

    #[test]
    fn domain_error_outside_levy_range() {
        let p = ModelParams::single_size(2.5);
        assert!(matches!(
            predict_sigma_a_exponent(&p, 0.0, 1),
            Err(Error::Domain(_))
        ));
    }
}
