//! Measured-versus-predicted report with pass/fail per tolerance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{write_atomic, MeasuredRow};
use crate::oracle::PredictionRow;

/// Where a run came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
    pub version: String,
}

impl Provenance {
    pub fn new(seed: Option<u64>, config_hash: Option<String>) -> Self {
        Provenance {
            seed,
            config_hash,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn read(path: &Path) -> Result<Provenance> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(self, path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Tolerance {
    /// |measured − predicted| ≤ x
    Absolute(f64),
    /// |measured/predicted − 1| ≤ x
    Relative(f64),
    /// |measured − predicted| ≤ x·stderr
    Stderr(f64),
}

impl Tolerance {
    /// Allowed absolute deviation for this pair.
    pub fn width(&self, predicted: f64, stderr: f64) -> f64 {
        match *self {
            Tolerance::Absolute(x) => x,
            Tolerance::Relative(x) => x * predicted.abs(),
            Tolerance::Stderr(k) => k * stderr,
        }
    }

    pub fn admits(&self, measured: f64, stderr: f64, predicted: f64) -> bool {
        let w = self.width(predicted, stderr);
        // NaN on either side fails
        (measured - predicted).abs() <= w
    }
}

/// Acceptance tolerance of a measured statistic, or `None` when no
/// criterion covers it.
pub fn tolerance_for(statistic: &str, a: Option<f64>, n: Option<u32>) -> Option<Tolerance> {
    use Tolerance::*;
    let at_zero = a.is_some_and(|a| a.abs() < 1e-12);
    Some(match statistic {
        "sigma2_exponent" if n == Some(1) && at_zero => Absolute(0.1),
        "kurtosis_exponent" if at_zero => Absolute(0.15),
        "chi" => Absolute(0.05),
        "a_c" if n.is_some_and(|n| n >= 2) => Absolute(0.3),
        "sigma2_slope" => Absolute(0.05),
        "sign_gamma_slope" => Absolute(0.05),
        "sign_gamma_intercept" => Absolute(0.15),
        "price_variance_exponent" => Absolute(0.1),
        "zeta" => Absolute(0.15),
        "covariance_exponent" => Absolute(0.07),
        "covariance_slope_left" | "covariance_slope_right" => Absolute(0.05),
        "a_star" => Absolute(0.15),
        "ratio_half" => Absolute(0.05),
        "ratio_one" => Relative(0.25),
        "initiation_rate" | "trade_rate" => Relative(0.01),
        "active_mean" => Stderr(3.0),
        "volume_flow" => Relative(0.02),
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Paired with a prediction but not covered by any tolerance.
    Unchecked,
    NoPrediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub statistic: String,
    pub a: Option<f64>,
    pub n: Option<u32>,
    pub measured: f64,
    pub stderr: f64,
    pub predicted: Option<f64>,
    pub tolerance: Option<Tolerance>,
    pub deviation: Option<f64>,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub checked: usize,
    pub passed: usize,
    pub failed: usize,
    pub unchecked: usize,
    pub no_prediction: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    /// Provenance of the measurements.
    pub measured: Option<Provenance>,
    /// Provenance of the predictions.
    pub predicted: Option<Provenance>,
    pub version: String,
    pub rows: Vec<ReportRow>,
    pub summary: Summary,
}

impl ReportBundle {
    pub fn passed(&self) -> bool {
        self.summary.failed == 0
    }

    /// Row for a statistic, if measured.
    pub fn row(&self, statistic: &str, a: Option<f64>, n: Option<u32>) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.statistic == statistic && same_a(r.a, a) && r.n == n)
    }
}

fn same_a(x: Option<f64>, y: Option<f64>) -> bool {
    match (x, y) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() < 1e-9,
        _ => false,
    }
}

/// Pairs every measured row with the prediction of the same statistic,
/// `a` and `n`.
pub fn build_report(
    measured: &[MeasuredRow],
    predictions: &[PredictionRow],
    measured_provenance: Option<Provenance>,
    predicted_provenance: Option<Provenance>,
) -> ReportBundle {
    let mut summary = Summary::default();
    let rows = measured
        .iter()
        .map(|m| {
            let predicted = predictions
                .iter()
                .find(|p| p.statistic == m.statistic && same_a(p.a, m.a) && p.n == m.n)
                .map(|p| p.value);
            let tolerance = predicted.and(tolerance_for(&m.statistic, m.a, m.n));
            let status = match (predicted, tolerance) {
                (None, _) => Status::NoPrediction,
                (Some(_), None) => Status::Unchecked,
                (Some(p), Some(t)) if t.admits(m.value, m.stderr, p) => Status::Pass,
                _ => Status::Fail,
            };
            match status {
                Status::Pass => summary.passed += 1,
                Status::Fail => summary.failed += 1,
                Status::Unchecked => summary.unchecked += 1,
                Status::NoPrediction => summary.no_prediction += 1,
            }
            ReportRow {
                statistic: m.statistic.clone(),
                a: m.a,
                n: m.n,
                measured: m.value,
                stderr: m.stderr,
                predicted,
                tolerance,
                deviation: predicted.map(|p| m.value - p),
                status,
            }
        })
        .collect();
    summary.checked = summary.passed + summary.failed;
    ReportBundle {
        measured: measured_provenance,
        predicted: predicted_provenance,
        version: env!("CARGO_PKG_VERSION").to_string(),
        rows,
        summary,
    }
}

pub(crate) fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("cannot serialize: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_report(report: &ReportBundle, path: &Path) -> Result<()> {
    write_json(report, path)
}

pub fn read_report(path: &Path) -> Result<ReportBundle> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(statistic: &str, a: Option<f64>, n: Option<u32>, value: f64) -> PredictionRow {
        PredictionRow {
            statistic: statistic.into(),
            a,
            n,
            value,
        }
    }

    #[test]
    fn pairs_and_grades() {
        let measured = vec![
            MeasuredRow::new("sigma2_exponent", Some(0.0), Some(1), 1.52, 0.01),
            MeasuredRow::new("sigma2_exponent", Some(1.0), Some(1), 1.4, 0.01),
            MeasuredRow::new("chi", None, None, 0.8, 0.0),
            MeasuredRow::new("omega", None, None, 0.2, 0.0),
        ];
        let preds = vec![
            pred("sigma2_exponent", Some(0.0), Some(1), 1.5),
            pred("sigma2_exponent", Some(1.0), Some(1), 1.25),
            pred("chi", None, None, 2.0 / 3.0),
        ];
        let r = build_report(&measured, &preds, None, None);
        let status: Vec<Status> = r.rows.iter().map(|x| x.status).collect();
        assert_eq!(
            status,
            vec![
                Status::Pass,
                Status::Unchecked,
                Status::Fail,
                Status::NoPrediction
            ]
        );
        assert_eq!(r.summary.checked, 2);
        assert!(!r.passed());
    }

    #[test]
    fn nan_measurement_fails() {
        assert!(!Tolerance::Absolute(1.0).admits(f64::NAN, 0.0, 1.0));
        assert!(Tolerance::Relative(0.25).admits(4.5, 0.0, 3.7));
        assert!(!Tolerance::Stderr(3.0).admits(10.0, 1.0, 6.0));
    }
}
