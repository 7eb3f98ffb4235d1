//! Sum-of-exponentials representation of decaying power-law tails.
//!
//! For 0 < α ≤ 1 and x ≥ 0,
//!
//! ```text
//! (x + s)^α − x^α = α/Γ(1−α) ∫₀^∞ e^{−λx} (1 − e^{−λs}) λ^{−1−α} dλ .
//! ```
//!
//! Substituting λ = e^u and applying the trapezoid rule in u gives a fixed
//! set of decay rates λ_j shared by every source. A source then contributes
//! one weight per node, and advancing time multiplies each node by
//! e^{−λ_j Δt}. The part of the integral below the smallest node is added in
//! closed form; it is constant as long as λ_min (x + s) stays tiny.

use statrs::function::gamma::gamma;

/// α/Γ(1−α), zero at α = 1 where the difference is the constant s.
pub fn coefficient(alpha: f64) -> f64 {
    if alpha >= 1.0 {
        0.0
    } else {
        alpha / gamma(1.0 - alpha)
    }
}

#[derive(Debug, Clone)]
pub struct ExpSumNodes {
    pub lambda: Vec<f64>,
    pub log_lambda: Vec<f64>,
    pub h: f64,
    /// Sources are only inserted once x ≥ x_min.
    pub x_min: f64,
}

/// Decay rates for sources with x ∈ [x_min, x_max + s]. The trapezoid
/// error in u decays like e^{−π²/h}.
impl ExpSumNodes {
    pub fn new(x_min: f64, x_max: f64, h: f64) -> Self {
        assert!(x_min > 0.0 && x_max >= x_min && h > 0.0);
        let u_lo = (1e-7 / x_max).ln();
        let u_hi = (40.0 / x_min).ln();
        let count = ((u_hi - u_lo) / h).ceil() as usize + 1;
        let log_lambda: Vec<f64> = (0..count).map(|j| u_lo + j as f64 * h).collect();
        ExpSumNodes {
            lambda: log_lambda.iter().map(|u| u.exp()).collect(),
            log_lambda,
            h,
            x_min,
        }
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// Per-node weight of a source D [(x + s)^α − x^α] observed at elapsed
    /// x after its end, for node `j`. `dc` is D times [`coefficient`]; the
    /// constant part is [`Self::tail`].
    #[inline]
    pub fn weight(&self, j: usize, dc: f64, alpha: f64, s: f64, x: f64) -> f64 {
        if dc == 0.0 {
            return 0.0;
        }
        let lam = self.lambda[j];
        let w = if j == 0 {
            // Euler–Maclaurin end correction; the integrand grows like
            // e^{(1−α)u} at the lower end.
            0.5 * self.h + self.h * self.h * (1.0 - alpha) / 12.0
        } else {
            self.h
        };
        let u = self.log_lambda[j];
        dc * w * (-alpha * u - lam * x).exp() * -(-lam * s).exp_m1()
    }

    /// Closed-form part of the integral below the first node.
    pub fn tail(&self, d: f64, alpha: f64, s: f64) -> f64 {
        if alpha >= 1.0 {
            return d * s;
        }
        let lam = self.lambda[0];
        d * alpha / gamma(2.0 - alpha) * s * lam.powf(1.0 - alpha)
    }

    /// Evaluates the representation for a single source; used in tests.
    pub fn evaluate(&self, d: f64, alpha: f64, s: f64, x: f64) -> f64 {
        let mut v = self.tail(d, alpha, s);
        let dc = d * coefficient(alpha);
        for j in 0..self.len() {
            v += self.weight(j, dc, alpha, s, x);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_power_law_difference() {
        let nodes = ExpSumNodes::new(10.0, 1e8, 0.5);
        for &alpha in &[0.5, 0.6, 0.8, 0.95, 1.0] {
            for &s in &[1.0, 7.3, 1e3, 1e6] {
                for &x in &[10.0f64, 33.0, 1e3, 1e5, 1e7] {
                    let exact = (x + s).powf(alpha) - x.powf(alpha);
                    let approx = nodes.evaluate(1.0, alpha, s, x);
                    let rel = (approx - exact).abs() / exact;
                    assert!(rel < 2e-6, "alpha {alpha} s {s} x {x}: {approx} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn node_count_is_modest() {
        let nodes = ExpSumNodes::new(16.0, 1e9, 0.5);
        assert!(nodes.len() < 100, "{}", nodes.len());
    }
}
