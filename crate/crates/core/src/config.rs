//! Run configuration: model parameters plus the analysis grids.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::price::ObservationGrid;

/// Window sizes in trades, either listed or generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TGridSpec {
    List(Vec<usize>),
    /// Powers of two from `min` to `max`, with the midpoints 3·2^(k−1)
    /// added when `per_octave` is 2.
    Dyadic {
        min: usize,
        max: usize,
        per_octave: u32,
    },
}

impl Default for TGridSpec {
    fn default() -> Self {
        TGridSpec::Dyadic {
            min: 16,
            max: 16384,
            per_octave: 2,
        }
    }
}

impl TGridSpec {
    pub fn values(&self) -> Result<Vec<usize>> {
        match self {
            TGridSpec::List(v) => Ok(v.clone()),
            TGridSpec::Dyadic {
                min,
                max,
                per_octave,
            } => {
                if *min == 0 || !min.is_power_of_two() {
                    return Err(Error::config("t_grid.min", "must be a power of two"));
                }
                if !matches!(per_octave, 1 | 2) {
                    return Err(Error::config("t_grid.per_octave", "must be 1 or 2"));
                }
                let mut v = Vec::new();
                let mut t = *min;
                while t <= *max {
                    v.push(t);
                    if *per_octave == 2 && t + t / 2 <= *max && t >= 2 {
                        v.push(t + t / 2);
                    }
                    t *= 2;
                }
                Ok(v)
            }
        }
    }
}

/// Volume exponents a, listed or as an arithmetic range (inclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AGridSpec {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Default for AGridSpec {
    fn default() -> Self {
        AGridSpec::Range {
            start: 0.0,
            stop: 3.0,
            step: 0.25,
        }
    }
}

impl AGridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            AGridSpec::List(v) => Ok(v.clone()),
            AGridSpec::Range { start, stop, step } => {
                if !(*step > 0.0) {
                    return Err(Error::config("a_grid.step", "must be positive"));
                }
                let n = ((stop - start) / step + 1e-9).floor();
                if n < 0.0 {
                    return Err(Error::config("a_grid", "stop is below start"));
                }
                // start + k·step, rounded so 0.25-steps stay exact
                Ok((0..=n as usize)
                    .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelParams,
    /// Trades per realization.
    pub horizon_trades: usize,
    pub n_realizations: usize,
    pub t_grid: TGridSpec,
    pub a_grid: AGridSpec,
    /// Window range [lo, hi] used in every power-law fit.
    pub fit_range: [f64; 2],
    /// Window range for the kurtosis exponent. Its power law only sets in
    /// once the ratio is well above the Gaussian 3; `null` uses `fit_range`.
    pub kurtosis_fit_range: Option<[f64; 2]>,
    /// Three-parameter a0 + a1 T^ζ fits instead of pure power laws.
    pub fit_offset: bool,
    pub moment_orders: Vec<u32>,
    /// Cap on child volume as a fraction of the day's volume; `null`
    /// disables clipping.
    pub clip_fraction: Option<f64>,
    /// Trades per synthetic day.
    pub day_block: usize,
    pub price_grid: ObservationGrid,
    pub volume_bins: usize,
    /// Window sizes used for the collapse scan of I^0.
    pub collapse_t: Vec<usize>,
    /// Window at which correlation ratios across a are read off.
    pub reference_t: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelParams::default(),
            horizon_trades: 1_000_000,
            n_realizations: 10,
            t_grid: TGridSpec::default(),
            a_grid: AGridSpec::default(),
            fit_range: [100.0, 1000.0],
            kurtosis_fit_range: None,
            fit_offset: false,
            moment_orders: vec![1, 2, 3],
            clip_fraction: Some(0.01),
            day_block: 10_000,
            price_grid: ObservationGrid::Regular { step: 8 },
            volume_bins: 5,
            collapse_t: vec![128, 256, 512, 1024],
            reference_t: 100,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn increasing<T: PartialOrd + Copy>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate_with_prefix("model.")?;
        if self.horizon_trades == 0 {
            return Err(Error::config("horizon_trades", "must be >= 1"));
        }
        if self.n_realizations == 0 {
            return Err(Error::config("n_realizations", "must be >= 1"));
        }
        let t = self.t_grid.values()?;
        if t.is_empty() || t[0] == 0 || !increasing(&t) {
            return Err(Error::config(
                "t_grid",
                "must be non-empty, positive and increasing",
            ));
        }
        let a = self.a_grid.values()?;
        if a.is_empty() || a.iter().any(|x| !(*x >= 0.0)) || !increasing(&a) {
            return Err(Error::config(
                "a_grid",
                "must be non-empty, non-negative and increasing",
            ));
        }
        let [lo, hi] = self.fit_range;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::config("fit_range", "needs 0 < lo < hi"));
        }
        if let Some([lo, hi]) = self.kurtosis_fit_range {
            if !(lo > 0.0 && hi > lo) {
                return Err(Error::config("kurtosis_fit_range", "needs 0 < lo < hi"));
            }
        }
        if self.moment_orders.is_empty() || self.moment_orders.contains(&0) {
            return Err(Error::config("moment_orders", "orders must be >= 1"));
        }
        if let Some(f) = self.clip_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::config("clip_fraction", "must lie in (0, 1]"));
            }
        }
        if self.day_block == 0 {
            return Err(Error::config("day_block", "must be >= 1"));
        }
        if self.volume_bins < 2 {
            return Err(Error::config("volume_bins", "must be >= 2"));
        }
        if self.collapse_t.len() == 1 || !increasing(&self.collapse_t) {
            return Err(Error::config(
                "collapse_t",
                "needs >= 2 increasing sizes or none",
            ));
        }
        if self.reference_t == 0 {
            return Err(Error::config("reference_t", "must be >= 1"));
        }
        self.price_grid.positions(1)?;
        Ok(())
    }

    pub fn t_values(&self) -> Vec<usize> {
        self.t_grid.values().unwrap_or_default()
    }

    pub fn a_values(&self) -> Vec<f64> {
        self.a_grid.values().unwrap_or_default()
    }

    /// Parses and validates; unknown keys are rejected with their path.
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let msg = e.inner().to_string();
            let key = if path == "." {
                "<document>".into()
            } else {
                path
            };
            Error::config(key, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pretty JSON with a fixed field order and a trailing newline.
    pub fn canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_json(&text)
}

pub fn write_config(config: &RunConfig, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, config.canonical_json().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.a_values().len(), 13);
        let t = c.t_values();
        assert_eq!(t.first(), Some(&16));
        assert_eq!(t.last(), Some(&16384));
        assert!(t.contains(&24) && t.contains(&12288));
    }

    #[test]
    fn invalid_mu1_is_named() {
        let e = RunConfig::from_json(r#"{"model": {"mu1": 0.9}}"#).unwrap_err();
        assert!(e.to_string().contains("mu1"), "{e}");
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn unknown_key_rejected() {
        let e = RunConfig::from_json(r#"{"model": {"nuu": 1.0}}"#).unwrap_err();
        assert!(e.to_string().contains("nuu"), "{e}");
        let e = RunConfig::from_json(r#"{"horizon": 3}"#).unwrap_err();
        assert!(e.to_string().contains("horizon"), "{e}");
    }

    #[test]
    fn canonical_round_trip() {
        let c = RunConfig::default();
        let text = c.canonical_json();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back.canonical_json(), text);
        assert_eq!(back.hash(), c.hash());
    }
}
