//! Power-law fits in log-log space, with an optional additive offset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Additive constant a0 of the offset model a0 + a1 x^ζ.
    pub offset: Option<f64>,
    pub exponent_stderr: f64,
    pub r_squared: f64,
    pub fit_range: (f64, f64),
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub with_offset: bool,
    /// Inclusive x range; `None` uses every point.
    pub range: Option<(f64, f64)>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            with_offset: false,
            range: None,
        }
    }
}

impl FitOptions {
    pub fn pure(range: (f64, f64)) -> Self {
        FitOptions {
            with_offset: false,
            range: Some(range),
        }
    }
}

/// Ordinary least squares y = c0 + c1 x. Returns (c0, c1, stderr of c1, r²).
pub fn linear_regression(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let stderr = if x.len() > 2 && sxx > 0.0 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    let r2 = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (intercept, slope, stderr, r2)
}

/// Fits y = A x^ζ (pure) or y = a0 + a1 x^ζ (offset) over `options.range`.
pub fn fit_power_law(x: &[f64], y: &[f64], options: FitOptions) -> Result<ExponentFit> {
    if x.len() != y.len() {
        return Err(Error::Domain("x and y lengths differ".into()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, _)| match options.range {
            Some((lo, hi)) => **a >= lo && **a <= hi,
            None => true,
        })
        .map(|(a, b)| (*a, *b))
        .unzip();
    if xs.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "power-law fit needs >= 4 points in range, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("power-law fit needs x > 0".into()));
    }
    let fit_range = (
        xs.iter().cloned().fold(f64::INFINITY, f64::min),
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    if ys.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Domain(
            "power-law fit needs y > 0 (log-log regression)".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (c0, c1, se, r2) = linear_regression(&lx, &ly);
    let pure = ExponentFit {
        exponent: c1,
        prefactor: c0.exp(),
        offset: None,
        exponent_stderr: se,
        r_squared: r2,
        fit_range,
        n_points: xs.len(),
    };
    if !options.with_offset {
        return Ok(pure);
    }
    fit_offset(&xs, &ys, pure)
}

/// Levenberg–Marquardt on log residuals ln(a0 + a1 x^ζ) - ln y, started at
/// the pure fit with a0 = min(y)/2.
fn fit_offset(xs: &[f64], ys: &[f64], pure: ExponentFit) -> Result<ExponentFit> {
    let n = xs.len();
    let ymin = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    // Parameters: a0, ln a1, ζ.
    let mut p = [
        0.5 * ymin,
        (0.5 * pure.prefactor).max(1e-300).ln(),
        pure.exponent,
    ];
    let model = |p: &[f64; 3], i: usize| p[0] + (p[1] + p[2] * lx[i]).exp();
    let sse = |p: &[f64; 3]| -> f64 {
        (0..n)
            .map(|i| {
                let m = model(p, i);
                if m > 0.0 {
                    (m.ln() - ly[i]).powi(2)
                } else {
                    f64::INFINITY
                }
            })
            .sum()
    };
    let mut cost = sse(&p);
    if !cost.is_finite() {
        p[0] = 0.0;
        cost = sse(&p);
    }
    let mut damping = 1e-3;
    let mut converged = false;
    let mut jtj = [[0.0; 3]; 3];
    for _iter in 0..500 {
        jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for i in 0..n {
            let m = model(&p, i);
            let pw = (p[1] + p[2] * lx[i]).exp();
            let r = m.ln() - ly[i];
            let j = [1.0 / m, pw / m, pw * lx[i] / m];
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for (d, row) in a.iter_mut().enumerate() {
                row[d] += damping * (jtj[d][d].abs() + 1e-30);
            }
            let Some(step) = solve3(a, [-jtr[0], -jtr[1], -jtr[2]]) else {
                damping *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            let c = sse(&trial);
            if c.is_finite() && c <= cost {
                let rel = (cost - c) / cost.max(1e-300);
                let small_step = step
                    .iter()
                    .zip(trial.iter())
                    .all(|(s, v)| s.abs() <= 1e-12 * (1.0 + v.abs()));
                p = trial;
                cost = c;
                damping = (damping * 0.3).max(1e-15);
                improved = true;
                if rel < 1e-15 || small_step || cost < 1e-28 {
                    converged = true;
                }
                break;
            }
            damping *= 10.0;
        }
        // No damped step lowers the cost: a minimum to working precision.
        if !improved {
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "offset fit did not converge: a0 = {}, a1 = {}, zeta = {}, sse = {cost}",
            p[0],
            p[1].exp(),
            p[2]
        )));
    }
    let ss_tot: f64 = {
        let m = ly.iter().sum::<f64>() / n as f64;
        ly.iter().map(|v| (v - m).powi(2)).sum()
    };
    let r2 = if ss_tot > 0.0 {
        (1.0 - cost / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let stderr = if n > 3 {
        inverse_diag(jtj, 2).map_or(f64::NAN, |d| (cost / (n - 3) as f64 * d).sqrt())
    } else {
        f64::NAN
    };
    Ok(ExponentFit {
        exponent: p[2],
        prefactor: p[1].exp(),
        offset: Some(p[0]),
        exponent_stderr: stderr,
        r_squared: r2,
        fit_range: pure.fit_range,
        n_points: n,
    })
}

fn det3(a: &[[f64; 3]; 3]) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Cramer's rule; `None` for a (numerically) singular matrix.
fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let d = det3(&a);
    let scale = a
        .iter()
        .flatten()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .powi(3);
    if !(d.abs() > 1e-300 && d.abs() > 1e-14 * scale) {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        *o = det3(&m) / d;
    }
    Some(out)
}

fn inverse_diag(a: [[f64; 3]; 3], k: usize) -> Option<f64> {
    let mut e = [0.0; 3];
    e[k] = 1.0;
    solve3(a, e).map(|x| x[k])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let x: Vec<f64> = (1..=20).map(|i| i as f64 * 10.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v.powf(1.5)).collect();
        let f = fit_power_law(&x, &y, FitOptions::default()).unwrap();
        assert!((f.exponent - 1.5).abs() < 1e-12);
        assert!((f.prefactor - 2.0).abs() < 1e-10);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_has_zero_exponent() {
        let x = [1.0, 2.0, 4.0, 8.0, 16.0];
        let f = fit_power_law(&x, &[3.0; 5], FitOptions::default()).unwrap();
        assert!(f.exponent.abs() < 1e-14);
    }

    #[test]
    fn offset_model_recovery() {
        let x: Vec<f64> = (0..12).map(|i| 2f64.powi(i + 2)).collect();
        let y: Vec<f64> = x.iter().map(|v| 5.0 + 2.0 * v).collect();
        let f = fit_power_law(
            &x,
            &y,
            FitOptions {
                with_offset: true,
                range: None,
            },
        )
        .unwrap();
        assert!((f.offset.unwrap() - 5.0).abs() < 1e-6, "{f:?}");
        assert!((f.prefactor - 2.0).abs() < 1e-6, "{f:?}");
        assert!((f.exponent - 1.0).abs() < 1e-6, "{f:?}");
    }

    #[test]
    fn too_few_points() {
        let r = fit_power_law(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], FitOptions::default());
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }
}
