//! Model parameters, validation, and the derived flow constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Shape of the per-metaorder impact trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PropagatorMode {
    /// Power-law propagator: rises as t^{1-β}, decays as t^{1-β} - (t-s)^{1-β}.
    Standard,
    /// Square-root rise during execution, propagator-like decay afterwards.
    #[default]
    TwoTime,
    /// Square-root rise, then a plateau at the peak.
    Permanent,
}

/// Largest β_q admitted by the two-time kernel.
pub const BETA_Q_MAX_TWO_TIME: f64 = 0.5;

/// Standard-normal quantile at 1e-6, used for the validity check on μ_q.
const Z_1E6: f64 = 4.753_424_308_822_899;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Metaorder initiation rate.
    pub nu: f64,
    /// Child execution rate of one active metaorder.
    pub phi_child: f64,
    /// Mean time between trades. `None` means derived from the flow,
    /// 1/(ν φ s̄); an explicit value overrides it in the impact kernels.
    pub tau0: Option<f64>,
    /// Minimum metaorder duration.
    pub s0: f64,
    pub mu1: f64,
    pub lambda: f64,
    pub m_logq: f64,
    pub sigma_logq: f64,
    pub gamma_cross: f64,
    #[serde(rename = "Gamma_amp")]
    pub gamma_amp: f64,
    pub beta1: f64,
    pub lambda_prime: f64,
    pub n0: f64,
    pub theta0: f64,
    pub z_inf: f64,
    #[serde(rename = "sigma_F")]
    pub sigma_f: f64,
    pub rho: f64,
    pub psi: f64,
    pub seed: u64,
    pub mode: PropagatorMode,
    /// Lower clamp on μ_q. Log-normal volumes with λ > 0 always reach μ_q ≤ 1
    /// far enough in the left tail; the clamp keeps durations integrable.
    pub mu_floor: Option<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            nu: 0.1,
            phi_child: 1.0,
            tau0: None,
            s0: 1.0,
            mu1: 1.5,
            lambda: 0.125,
            m_logq: 0.0,
            sigma_logq: 1.0,
            gamma_cross: 0.6,
            gamma_amp: 0.0,
            beta1: 0.275,
            lambda_prime: 0.15,
            n0: 10.0,
            theta0: 1.0,
            z_inf: 0.0,
            sigma_f: 0.0,
            rho: 0.0,
            psi: 0.0,
            seed: 42,
            mode: PropagatorMode::TwoTime,
            mu_floor: Some(1.1),
        }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(
            key,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(
            key,
            format!("must be finite and >= 0, got {v}"),
        ))
    }
}

impl ModelParams {
    /// Single-size, no cross-correlation, no impact: the plain flow model.
    pub fn single_size(mu: f64) -> Self {
        ModelParams {
            mu1: mu,
            lambda: 0.0,
            sigma_logq: 0.0,
            lambda_prime: 0.0,
            mu_floor: None,
            ..Default::default()
        }
    }

    /// Checks every invariant. Keys in errors are prefixed with `prefix`
    /// (e.g. `model.`) so that messages carry the full config path.
    pub fn validate_with_prefix(&self, prefix: &str) -> Result<()> {
        let k = |name: &str| format!("{prefix}{name}");
        non_negative(&k("nu"), self.nu)?;
        positive(&k("phi_child"), self.phi_child)?;
        if let Some(t) = self.tau0 {
            positive(&k("tau0"), t)?;
        }
        positive(&k("s0"), self.s0)?;
        if !(self.mu1.is_finite() && self.mu1 > 1.0) {
            return Err(Error::config(
                k("mu1"),
                format!("must be > 1 for a finite mean duration, got {}", self.mu1),
            ));
        }
        if !self.lambda.is_finite() {
            return Err(Error::config(k("lambda"), "must be finite"));
        }
        if !self.m_logq.is_finite() {
            return Err(Error::config(k("m_logq"), "must be finite"));
        }
        non_negative(&k("sigma_logq"), self.sigma_logq)?;
        if !(self.gamma_cross > 0.0 && self.gamma_cross <= 2.0) {
            return Err(Error::config(
                k("gamma_cross"),
                format!("must lie in (0, 2], got {}", self.gamma_cross),
            ));
        }
        non_negative(&k("Gamma_amp"), self.gamma_amp)?;
        non_negative(&k("beta1"), self.beta1)?;
        match self.mode {
            PropagatorMode::TwoTime if self.beta1 >= 0.5 => {
                return Err(Error::config(
                    k("beta1"),
                    format!("must be < 1/2 in two_time mode, got {}", self.beta1),
                ));
            }
            PropagatorMode::Standard if self.beta1 >= 1.0 => {
                return Err(Error::config(
                    k("beta1"),
                    format!("must be < 1 in standard mode, got {}", self.beta1),
                ));
            }
            _ => {}
        }
        if !self.lambda_prime.is_finite() {
            return Err(Error::config(k("lambda_prime"), "must be finite"));
        }
        non_negative(&k("n0"), self.n0)?;
        non_negative(&k("theta0"), self.theta0)?;
        non_negative(&k("z_inf"), self.z_inf)?;
        non_negative(&k("sigma_F"), self.sigma_f)?;
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err(Error::config(
                k("rho"),
                format!("must lie in [0, 1), got {}", self.rho),
            ));
        }
        if self.rho > 0.0 && self.nu == 0.0 {
            return Err(Error::config(k("rho"), "informed coupling needs nu > 0"));
        }
        if !self.psi.is_finite() {
            return Err(Error::config(k("psi"), "must be finite"));
        }
        if let Some(f) = self.mu_floor {
            if !(f.is_finite() && f > 1.0) {
                return Err(Error::config(
                    k("mu_floor"),
                    format!("must be > 1, got {f}"),
                ));
            }
        }
        // μ_q across the central 1 - 2e-6 mass of the volume distribution.
        for z in [-Z_1E6, Z_1E6] {
            let ln_q = self.m_logq + self.sigma_logq * z;
            let mu = self.mu_of_ln_q(ln_q);
            if !(mu > 1.0) {
                let key = if self.lambda != 0.0 { "lambda" } else { "mu1" };
                return Err(Error::config(
                    k(key),
                    format!(
                        "mu_q = {mu:.4} <= 1 at ln q = {ln_q:.3} (1e-6 quantile of the volume \
                         distribution); reduce lambda or sigma_logq, or set mu_floor"
                    ),
                ));
            }
            if self.mode == PropagatorMode::Standard && self.beta_of_ln_q(ln_q) >= 1.0 {
                return Err(Error::config(
                    k("lambda_prime"),
                    format!("beta_q >= 1 at ln q = {ln_q:.3} in standard mode"),
                ));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_prefix("")
    }

    /// Duration tail exponent μ_q at log-volume `ln_q`, after the floor.
    pub fn mu_of_ln_q(&self, ln_q: f64) -> f64 {
        let mu = self.mu1 + self.lambda * ln_q;
        match self.mu_floor {
            Some(f) => mu.max(f),
            None => mu,
        }
    }

    pub fn mu_q(&self, q: f64) -> f64 {
        self.mu_of_ln_q(q.ln())
    }

    /// Impact decay exponent β_q = max(0, β1 - λ' ln q). In two-time mode it
    /// is also capped at 1/2, where the kernel stops being defined.
    pub fn beta_of_ln_q(&self, ln_q: f64) -> f64 {
        match self.mode {
            PropagatorMode::Permanent => 0.0,
            PropagatorMode::TwoTime => (self.beta1 - self.lambda_prime * ln_q)
                .max(0.0)
                .min(BETA_Q_MAX_TWO_TIME),
            PropagatorMode::Standard => (self.beta1 - self.lambda_prime * ln_q).max(0.0),
        }
    }

    pub fn beta_q(&self, q: f64) -> f64 {
        self.beta_of_ln_q(q.ln())
    }

    /// Mean duration of metaorders with child volume `q`.
    pub fn mean_duration_q(&self, q: f64) -> f64 {
        let mu = self.mu_q(q);
        mu * self.s0 / (mu - 1.0)
    }

    /// μ_m := μ1 + λ m, the exponent at the median volume.
    pub fn mu_m(&self) -> f64 {
        self.mu1 + self.lambda * self.m_logq
    }

    /// β_m := β1 - λ' m.
    pub fn beta_m(&self) -> f64 {
        self.beta1 - self.lambda_prime * self.m_logq
    }

    /// E_q[h(q)] over the log-normal volume distribution.
    pub fn volume_expectation<F: Fn(f64) -> f64>(&self, h: F) -> Result<f64> {
        if self.sigma_logq == 0.0 {
            return Ok(h(self.m_logq.exp()));
        }
        quad::gaussian_expectation(|g| h((self.m_logq + self.sigma_logq * g).exp()), 1e-10)
    }

    pub fn derived(&self) -> Result<FlowConstants> {
        let s_bar = self.volume_expectation(|q| self.mean_duration_q(q))?;
        let q_bar = self.volume_expectation(|q| q)?;
        let qs_bar = self.volume_expectation(|q| q * self.mean_duration_q(q))?;
        let trade_rate = self.nu * self.phi_child * s_bar;
        let tau0 = match self.tau0 {
            Some(t) => t,
            None if trade_rate > 0.0 => 1.0 / trade_rate,
            None => f64::INFINITY,
        };
        Ok(FlowConstants {
            s_bar,
            q_bar,
            n_bar: self.phi_child * s_bar,
            tau0,
            trade_rate,
            active_mean: self.nu * s_bar,
            volume_flow: self.nu * self.phi_child * qs_bar,
        })
    }
}

/// Stationary flow identities implied by a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConstants {
    /// Mean metaorder duration.
    pub s_bar: f64,
    /// Mean child volume.
    pub q_bar: f64,
    /// Mean number of child orders per metaorder.
    pub n_bar: f64,
    /// Mean time between trades (or the configured override).
    pub tau0: f64,
    /// Trades per unit time.
    pub trade_rate: f64,
    /// Mean number of simultaneously active metaorders.
    pub active_mean: f64,
    /// Volume traded per unit time, ν φ E[q s̄_q]. Equals ν q̄ φ s̄ when the
    /// duration law does not depend on q.
    pub volume_flow: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ModelParams::default().validate().unwrap();
        ModelParams::single_size(1.5).validate().unwrap();
    }

    #[test]
    fn mu1_below_one_is_rejected_by_name() {
        let p = ModelParams {
            mu1: 0.9,
            ..ModelParams::single_size(1.5)
        };
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("mu1"), "{err}");
    }

    #[test]
    fn tail_quantile_check_needs_floor() {
        let p = ModelParams {
            mu_floor: None,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn beta_is_clipped() {
        let p = ModelParams::default();
        assert_eq!(p.beta_q(1e6), 0.0);
        assert!(p.beta_q(1e-6) <= BETA_Q_MAX_TWO_TIME);
        assert!((p.beta_q(1.0) - 0.275).abs() < 1e-15);
    }

    #[test]
    fn single_size_flow_constants() {
        let p = ModelParams::single_size(1.5);
        let d = p.derived().unwrap();
        assert!((d.s_bar - 3.0).abs() < 1e-12);
        assert!((d.trade_rate - 0.3).abs() < 1e-12);
        assert!((d.tau0 - 1.0 / 0.3).abs() < 1e-12);
        assert!((d.volume_flow - 0.3).abs() < 1e-12);
    }

    #[test]
    fn lognormal_flow_constants() {
        // λ = 0: volume flow factorizes.
        let p = ModelParams {
            lambda: 0.0,
            lambda_prime: 0.0,
            mu_floor: None,
            ..Default::default()
        };
        let d = p.derived().unwrap();
        assert!((d.q_bar - 0.5f64.exp()).abs() < 1e-9);
        assert!((d.volume_flow - p.nu * d.q_bar * p.phi_child * d.s_bar).abs() < 1e-9);
    }
}
