//! Small worked examples with exactly known answers, runnable from the CLI.

use std::path::PathBuf;

use crate::config::RunConfig;
use crate::error::Result;
use crate::estimators::{clip_volumes, generalized_imbalance, ks_distance};
use crate::flow::{simulate_tape, TradeTape};
use crate::io::{read_tape_csv, write_tape_csv};
use crate::oracle::{c_beta_gamma, c_beta_gamma_closed, PredictionSet};
use crate::params::ModelParams;
use crate::price::b_beta;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check {
            name,
            passed,
            detail,
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

struct Scratch(PathBuf);

impl Scratch {
    fn new() -> std::io::Result<Self> {
        let d = std::env::temp_dir().join(format!("impactflow-selftest-{}", std::process::id()));
        std::fs::create_dir_all(&d)?;
        Ok(Scratch(d))
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

pub fn run() -> Vec<Check> {
    let scratch = Scratch::new().ok();
    let dir = scratch
        .as_ref()
        .map(|s| s.0.clone())
        .unwrap_or_else(std::env::temp_dir);
    vec![
        check("config defaults", || {
            let c = RunConfig::from_json("{}")?;
            Ok((
                c == RunConfig::default(),
                format!("{} a values", c.a_values().len()),
            ))
        }),
        check("mu1 below one is named", || {
            let e = RunConfig::from_json(r#"{"model": {"mu1": 0.9}}"#).err();
            let msg = e.map(|e| e.to_string()).unwrap_or_default();
            Ok((msg.contains("mu1"), msg))
        }),
        check("config canonical round trip", || {
            let text = RunConfig::default().canonical_json();
            Ok((
                RunConfig::from_json(&text)?.canonical_json() == text,
                String::new(),
            ))
        }),
        check("tape csv round trip", || {
            let tape = simulate_tape(&ModelParams::default(), 2000, 7)?;
            let path = dir.join("round.csv");
            write_tape_csv(&tape, &path)?;
            let back = read_tape_csv(&path)?;
            Ok((back == tape, format!("{} trades", tape.len())))
        }),
        check("external tape without metaorder ids", || {
            let path = dir.join("external.csv");
            std::fs::write(
                &path,
                "trade_idx,time,sign,volume\n0,0.0,1,1.0\n1,0.5,-1,2.0\n2,1.0,1,1.5\n",
            )
            .map_err(|e| crate::Error::io(&path, e))?;
            let t = read_tape_csv(&path)?;
            Ok((
                t.len() == 3 && t.metaorder_id.is_none(),
                format!("{} trades", t.len()),
            ))
        }),
        check("sign zero rejected with line", || {
            let path = dir.join("bad.csv");
            std::fs::write(
                &path,
                "trade_idx,time,sign,volume\n0,0.0,1,1.0\n1,0.5,0,2.0\n",
            )
            .map_err(|e| crate::Error::io(&path, e))?;
            let msg = read_tape_csv(&path)
                .err()
                .map(|e| e.to_string())
                .unwrap_or_default();
            Ok((msg.contains(":3:"), msg))
        }),
        check("clip below cap is identity", || {
            let t = TradeTape::from_signs_volumes(vec![1, -1, 1], vec![1.0, 1.0, 1.0])?;
            Ok((clip_volumes(&t, 1.0, 10)? == t, String::new()))
        }),
        check("imbalance of three trades", || {
            let t = TradeTape::from_signs_volumes(vec![1, 1, -1], vec![2.0, 3.0, 1.0])?;
            let mut v = Vec::new();
            for a in [0.0, 1.0, 2.0] {
                v.push(generalized_imbalance(&t, 3, a)?.values[0]);
            }
            Ok((v == [1.0, 4.0, 12.0], format!("{v:?}")))
        }),
        check("B_0 = 2", || {
            let b = b_beta(0.0);
            Ok(((b - 2.0).abs() < 1e-12, format!("{b}")))
        }),
        check("Sigma^2 exponent at a = 0 is 3 - mu", || {
            let rows = PredictionSet::new(&ModelParams::default(), &[0.0], 100.0)?.rows();
            let v = rows
                .iter()
                .find(|r| r.statistic == "sigma2_exponent" && r.a == Some(0.0) && r.n == Some(1))
                .map(|r| r.value);
            Ok((v == Some(1.5), format!("{v:?}")))
        }),
        check("KS distance of shifted samples", || {
            let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
            let b: Vec<f64> = (50..150).map(|i| i as f64).collect();
            let d = ks_distance(&a, &b, 1.0, 1.0);
            Ok(((d - 0.5).abs() < 1e-12, format!("{d}")))
        }),
        check("C(0.2, 0.6) quadrature", || {
            let c = c_beta_gamma(0.2, 0.6)?;
            let exact = c_beta_gamma_closed(0.2, 0.6);
            Ok((
                (c / exact - 1.0).abs() < 1e-4,
                format!("{c:.6} vs {exact:.6}"),
            ))
        }),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_pass() {
        for c in super::run() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
