//! Statistics measured on tapes: imbalances, moment scaling, sign memory by
//! volume bin, price/imbalance covariance and correlation, collapse scans.

pub mod autocorr;
pub mod clip;
pub mod collapse;
pub mod fit;
pub mod imbalance;
pub mod stats;
pub mod surface;

use serde::{Deserialize, Serialize};

use crate::flow::TradeTape;
use crate::price::PricePath;

pub use autocorr::{
    autocorrelation, sign_autocorrelation_by_volume_bin, AutocorrOptions, BinCorrelation,
};
pub use clip::clip_volumes;
pub use collapse::{
    aggregated_impact_curve, collapse_exponents, default_chi_grid, distribution_collapse,
    ks_distance, scan_collapse, CollapseExponents, CollapseScan, ImpactCurve,
};
pub use fit::{fit_power_law, linear_regression, ExponentFit, FitOptions};
pub use imbalance::{
    generalized_imbalance, moment_scaling, moment_surface, ImbalanceSeries, MomentAnalysis,
};
pub use surface::{correlation_surface, covariance_surface, price_moments, window_price_changes};

/// One tape with its (optional) price path. Estimators pool windows over a
/// slice of realizations.
#[derive(Debug, Clone, Copy)]
pub struct Realization<'a> {
    pub tape: &'a TradeTape,
    pub price: Option<&'a PricePath>,
}

impl<'a> Realization<'a> {
    pub fn new(tape: &'a TradeTape, price: Option<&'a PricePath>) -> Self {
        Realization { tape, price }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Σ_a^(2n) for the given n.
    Moment(u32),
    /// Kurtosis ratio E[I⁴]/E[I²]².
    Kurtosis,
    Covariance,
    Correlation,
    /// E[Δ^(2n)] of price changes.
    PriceMoment(u32),
    Slope,
}

impl Statistic {
    /// Tag used in the CSV `statistic` column.
    pub fn tag(&self) -> String {
        match self {
            Statistic::Moment(n) => format!("sigma2n_n{n}"),
            Statistic::Kurtosis => "kurtosis".into(),
            Statistic::Covariance => "covariance".into(),
            Statistic::Correlation => "correlation".into(),
            Statistic::PriceMoment(n) => format!("price_moment_n{n}"),
            Statistic::Slope => "slope".into(),
        }
    }

    pub fn from_tag(tag: &str) -> Option<Statistic> {
        let parse_n = |rest: &str| rest.parse::<u32>().ok();
        match tag {
            "kurtosis" => Some(Statistic::Kurtosis),
            "covariance" => Some(Statistic::Covariance),
            "correlation" => Some(Statistic::Correlation),
            "slope" => Some(Statistic::Slope),
            _ => {
                if let Some(r) = tag.strip_prefix("sigma2n_n") {
                    parse_n(r).map(Statistic::Moment)
                } else if let Some(r) = tag.strip_prefix("price_moment_n") {
                    parse_n(r).map(Statistic::PriceMoment)
                } else {
                    None
                }
            }
        }
    }
}

/// Values on a (T, a) grid; `value[t_idx][a_idx]`. Undefined entries are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSurface {
    pub statistic: Statistic,
    pub t_grid: Vec<usize>,
    pub a_grid: Vec<f64>,
    pub value: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// Pooled window count per T.
    pub n_windows: Vec<usize>,
}

impl ScalingSurface {
    pub fn new(statistic: Statistic, t_grid: &[usize], a_grid: &[f64]) -> Self {
        let nt = t_grid.len();
        let na = a_grid.len();
        ScalingSurface {
            statistic,
            t_grid: t_grid.to_vec(),
            a_grid: a_grid.to_vec(),
            value: vec![vec![f64::NAN; na]; nt],
            stderr: vec![vec![f64::NAN; na]; nt],
            n_windows: vec![0; nt],
        }
    }

    pub fn column(&self, a_idx: usize) -> Vec<f64> {
        self.value.iter().map(|row| row[a_idx]).collect()
    }

    pub fn t_as_f64(&self) -> Vec<f64> {
        self.t_grid.iter().map(|&t| t as f64).collect()
    }

    /// Power-law fit in T of every a column; `None` where the fit fails
    /// (too few points or non-positive values).
    pub fn fit_columns(&self, fit: FitOptions) -> Vec<Option<ExponentFit>> {
        let x = self.t_as_f64();
        (0..self.a_grid.len())
            .map(|ai| imbalance::try_fit(&x, &self.column(ai), fit))
            .collect()
    }

    /// Index of `a` in the grid, tolerating rounding.
    pub fn a_index(&self, a: f64) -> Option<usize> {
        self.a_grid.iter().position(|&x| (x - a).abs() < 1e-9)
    }

    pub fn t_index(&self, t: usize) -> Option<usize> {
        self.t_grid.iter().position(|&x| x == t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip() {
        for s in [
            Statistic::Moment(2),
            Statistic::Kurtosis,
            Statistic::Covariance,
            Statistic::Correlation,
            Statistic::PriceMoment(3),
            Statistic::Slope,
        ] {
            assert_eq!(Statistic::from_tag(&s.tag()), Some(s));
        }
    }
}
