//! CSV and JSON serialization of tapes, prices, surfaces and predictions.
//!
//! Floats are written with 17 significant digits so every value reads back
//! bit for bit. All files are written to a temporary sibling and renamed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::fit::ExponentFit;
use crate::estimators::{ScalingSurface, Statistic};
use crate::flow::{Horizon, Metaorder, SignDiagnostics, TradeTape};
use crate::oracle::PredictionRow;
use crate::params::ModelParams;
use crate::price::PricePath;

pub const TAPE_HEADER: [&str; 6] = [
    "trade_idx",
    "time",
    "metaorder_id",
    "sign",
    "volume",
    "price",
];
pub const PRICE_HEADER: [&str; 2] = ["trade_idx", "price"];
pub const SURFACE_HEADER: [&str; 5] = ["statistic", "T", "a", "value", "stderr"];
pub const PREDICTION_HEADER: [&str; 4] = ["statistic", "a", "n", "value"];
pub const MEASURED_HEADER: [&str; 5] = ["statistic", "a", "n", "value", "stderr"];
pub const EXPONENT_HEADER: [&str; 11] = [
    "statistic",
    "a",
    "n",
    "exponent",
    "exponent_stderr",
    "prefactor",
    "offset",
    "r_squared",
    "fit_lo",
    "fit_hi",
    "n_points",
];
const METAORDER_HEADER: [&str; 6] = [
    "id",
    "start_time",
    "sign",
    "child_volume",
    "duration",
    "participation",
];

/// 17 significant digits; NaN and infinities as `NaN`, `inf`, `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn fmt_opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::Numerical(format!("csv encoding: {e}"));
    w.write_record(header).map_err(io_err)?;
    for r in rows {
        w.write_record(r).map_err(io_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Numerical(format!("csv encoding: {e}")))
}

/// A CSV whose header is an ordered subset of the allowed names. `columns`
/// maps each allowed name to its position in the file.
struct Table {
    columns: Vec<Option<usize>>,
    reader: csv::Reader<fs::File>,
}

fn open_table(path: &Path, allowed: &[&str], required: &[&str]) -> Result<Table> {
    let parse = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| parse(1, format!("unreadable header: {e}")))?
        .clone();
    let mut columns = vec![None; allowed.len()];
    let mut last = None;
    for (i, name) in header.iter().enumerate() {
        let pos = allowed.iter().position(|a| *a == name).ok_or_else(|| {
            parse(
                1,
                format!("unexpected column `{name}`; allowed: {}", allowed.join(",")),
            )
        })?;
        if last.is_some_and(|l| pos <= l) {
            return Err(parse(
                1,
                format!("columns must appear in the order {}", allowed.join(",")),
            ));
        }
        last = Some(pos);
        columns[pos] = Some(i);
    }
    for name in required {
        let pos = allowed
            .iter()
            .position(|a| a == name)
            .expect("required is allowed");
        if columns[pos].is_none() {
            return Err(parse(1, format!("missing required column `{name}`")));
        }
    }
    Ok(Table { columns, reader })
}

impl Table {
    /// Calls `f(line, fields)` per record; `fields[c]` is the trimmed value
    /// of allowed column `c`, or `None` when the file lacks that column.
    fn for_each<F>(&mut self, path: &Path, mut f: F) -> Result<()>
    where
        F: FnMut(usize, &[Option<&str>]) -> Result<()>,
    {
        let mut rec = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut rec) {
                Ok(true) => {}
                Ok(false) => return Ok(()),
                Err(e) => {
                    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line,
                        message: e.to_string(),
                    });
                }
            }
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let fields: Vec<Option<&str>> = self
                .columns
                .iter()
                .map(|c| c.and_then(|i| rec.get(i)).map(str::trim))
                .collect();
            f(line, &fields)?;
        }
    }
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    name: &str,
    s: Option<&str>,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let s = s.unwrap_or("");
    s.parse::<T>().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("bad {name} `{s}`: {e}"),
    })
}

fn parse_opt<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    name: &str,
    s: Option<&str>,
) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match s {
        None | Some("") => Ok(None),
        v => parse_field(path, line, name, v).map(Some),
    }
}

/// `<stem>.metaorders.csv` and `<stem>.meta.json` next to a tape file.
pub fn sidecar_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "tape".into());
    (
        path.with_file_name(format!("{stem}.metaorders.csv")),
        path.with_file_name(format!("{stem}.meta.json")),
    )
}

/// Tape metadata that the trade rows do not carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TapeMeta {
    pub horizon: Horizon,
    pub params: Option<ModelParams>,
    pub sign_diagnostics: Option<SignDiagnostics>,
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
}

/// Writes the trade rows plus, for simulated tapes, the metaorder registry
/// and metadata sidecars.
pub fn write_tape_csv(tape: &TradeTape, path: &Path) -> Result<()> {
    write_tape_csv_with(tape, path, None)
}

pub fn write_tape_csv_with(tape: &TradeTape, path: &Path, config_hash: Option<&str>) -> Result<()> {
    tape.validate()?;
    let rows = (0..tape.len()).map(|k| {
        [
            tape.trade_idx[k].to_string(),
            fmt_f64(tape.time[k]),
            fmt_opt(tape.metaorder_id.as_ref().map(|m| m[k])),
            tape.sign[k].to_string(),
            fmt_f64(tape.volume[k]),
            fmt_opt_f64(tape.price.as_ref().map(|p| p[k])),
        ]
    });
    write_atomic(path, &csv_bytes(&TAPE_HEADER, rows)?)?;
    let (reg, meta) = sidecar_paths(path);
    if !tape.metaorders.is_empty() {
        let rows = tape.metaorders.iter().map(|m| {
            [
                m.id.to_string(),
                fmt_f64(m.start_time),
                m.sign.to_string(),
                fmt_f64(m.child_volume),
                fmt_f64(m.duration),
                fmt_f64(m.participation),
            ]
        });
        write_atomic(&reg, &csv_bytes(&METAORDER_HEADER, rows)?)?;
    }
    let m = TapeMeta {
        horizon: tape.horizon,
        params: tape.params_snapshot.clone(),
        sign_diagnostics: tape.sign_diagnostics,
        config_hash: config_hash.map(str::to_string),
        seed: tape.params_snapshot.as_ref().map(|p| p.seed),
    };
    let mut text = serde_json::to_string_pretty(&m).expect("meta serializes");
    text.push('\n');
    write_atomic(&meta, text.as_bytes())
}

/// Reads a tape. `metaorder_id` and `price` columns are optional; without
/// ids the tape is analysis-only. Sidecars are loaded when present.
pub fn read_tape_csv(path: &Path) -> Result<TradeTape> {
    let mut table = open_table(path, &TAPE_HEADER, &["trade_idx", "time", "sign", "volume"])?;
    let mut tape = TradeTape {
        trade_idx: Vec::new(),
        time: Vec::new(),
        metaorder_id: None,
        sign: Vec::new(),
        volume: Vec::new(),
        price: None,
        metaorders: Vec::new(),
        horizon: Horizon {
            trades: 0,
            start: 0.0,
            end: 0.0,
        },
        params_snapshot: None,
        sign_diagnostics: None,
    };
    let mut ids = Optional::new("metaorder_id");
    let mut prices = Optional::new("price");
    table.for_each(path, |line, f| {
        let idx: u64 = parse_field(path, line, "trade_idx", f[0])?;
        let time: f64 = parse_field(path, line, "time", f[1])?;
        let sign: i8 = parse_field(path, line, "sign", f[3])?;
        let volume: f64 = parse_field(path, line, "volume", f[4])?;
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if sign != 1 && sign != -1 {
            return Err(bad(format!("sign must be -1 or 1, got {sign}")));
        }
        if !(volume > 0.0 && volume.is_finite()) {
            return Err(bad(format!("volume must be positive, got {volume}")));
        }
        if !time.is_finite() {
            return Err(bad(format!("time must be finite, got {time}")));
        }
        if tape.trade_idx.last().is_some_and(|&prev| idx <= prev) {
            return Err(bad(format!("trade_idx {idx} does not increase")));
        }
        if tape.time.last().is_some_and(|&prev| time < prev) {
            return Err(bad(format!("time {time} decreases")));
        }
        tape.trade_idx.push(idx);
        tape.time.push(time);
        tape.sign.push(sign);
        tape.volume.push(volume);
        ids.push(path, line, f[2])?;
        prices.push(path, line, f[5])?;
        Ok(())
    })?;
    let n = tape.len();
    tape.metaorder_id = ids.finish();
    tape.price = prices.finish();
    if let (Some(&first), Some(&last)) = (tape.time.first(), tape.time.last()) {
        tape.horizon = Horizon {
            trades: n,
            start: first.min(0.0),
            end: last,
        };
    }
    let (reg, meta) = sidecar_paths(path);
    if reg.exists() {
        tape.metaorders = read_metaorders(&reg)?;
    }
    if meta.exists() {
        let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
        let m: TapeMeta = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: meta.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
        tape.horizon = m.horizon;
        tape.params_snapshot = m.params;
        tape.sign_diagnostics = m.sign_diagnostics;
    }
    tape.validate().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    Ok(tape)
}

/// An optional column: either filled on every row or empty on every row.
struct Optional<T> {
    name: &'static str,
    values: Vec<T>,
    rows: usize,
}

impl<T: std::str::FromStr> Optional<T>
where
    T::Err: std::fmt::Display,
{
    fn new(name: &'static str) -> Self {
        Optional {
            name,
            values: Vec::new(),
            rows: 0,
        }
    }

    fn push(&mut self, path: &Path, line: usize, s: Option<&str>) -> Result<()> {
        let v: Option<T> = parse_opt(path, line, self.name, s)?;
        let consistent = match &v {
            Some(_) => self.values.len() == self.rows,
            None => self.values.is_empty(),
        };
        if !consistent {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("{} must be filled on every row or on none", self.name),
            });
        }
        if let Some(v) = v {
            self.values.push(v);
        }
        self.rows += 1;
        Ok(())
    }

    fn finish(self) -> Option<Vec<T>> {
        (self.rows > 0 && self.values.len() == self.rows).then_some(self.values)
    }
}

fn read_metaorders(path: &Path) -> Result<Vec<Metaorder>> {
    let mut table = open_table(path, &METAORDER_HEADER, &METAORDER_HEADER)?;
    let mut out = Vec::new();
    table.for_each(path, |line, f| {
        out.push(Metaorder {
            id: parse_field(path, line, "id", f[0])?,
            start_time: parse_field(path, line, "start_time", f[1])?,
            sign: parse_field(path, line, "sign", f[2])?,
            child_volume: parse_field(path, line, "child_volume", f[3])?,
            duration: parse_field(path, line, "duration", f[4])?,
            participation: parse_field(path, line, "participation", f[5])?,
        });
        Ok(())
    })?;
    Ok(out)
}

/// `trade_idx,price` rows of a price path.
pub fn write_price_csv(path: &PricePath, file: &Path) -> Result<()> {
    let rows = path
        .grid
        .iter()
        .zip(&path.total)
        .map(|(k, p)| [k.to_string(), fmt_f64(*p)]);
    write_atomic(file, &csv_bytes(&PRICE_HEADER, rows)?)
}

/// Reads `trade_idx,price`; positions are trade indices of `tape` (or N for
/// the end of the tape).
pub fn read_price_csv(file: &Path, tape: &TradeTape) -> Result<PricePath> {
    let mut table = open_table(file, &PRICE_HEADER, &PRICE_HEADER)?;
    let mut grid: Vec<u64> = Vec::new();
    let mut total = Vec::new();
    table.for_each(file, |line, f| {
        let k: u64 = parse_field(file, line, "trade_idx", f[0])?;
        let p: f64 = parse_field(file, line, "price", f[1])?;
        if grid.last().is_some_and(|&g| k <= g) || k > tape.len() as u64 {
            return Err(Error::Parse {
                path: file.to_path_buf(),
                line,
                message: format!("trade_idx {k} out of order or beyond the tape"),
            });
        }
        grid.push(k);
        total.push(p);
        Ok(())
    })?;
    Ok(PricePath::observed(grid, total, tape))
}

pub fn write_surfaces_csv(surfaces: &[ScalingSurface], file: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for s in surfaces {
        for (ti, t) in s.t_grid.iter().enumerate() {
            for (ai, a) in s.a_grid.iter().enumerate() {
                rows.push([
                    s.statistic.tag(),
                    t.to_string(),
                    fmt_f64(*a),
                    fmt_f64(s.value[ti][ai]),
                    fmt_f64(s.stderr[ti][ai]),
                ]);
            }
        }
    }
    write_atomic(file, &csv_bytes(&SURFACE_HEADER, rows)?)
}

/// Regroups `statistic,T,a,value,stderr` rows into surfaces, in order of
/// first appearance. Window counts are not stored and read back as 0.
pub fn read_surfaces_csv(file: &Path) -> Result<Vec<ScalingSurface>> {
    let mut table = open_table(file, &SURFACE_HEADER, &SURFACE_HEADER)?;
    let mut groups: Vec<(Statistic, Vec<(usize, f64, f64, f64)>)> = Vec::new();
    table.for_each(file, |line, f| {
        let tag = f[0].unwrap_or("");
        let stat = Statistic::from_tag(tag).ok_or_else(|| Error::Parse {
            path: file.to_path_buf(),
            line,
            message: format!("unknown statistic `{tag}`"),
        })?;
        let t: usize = parse_field(file, line, "T", f[1])?;
        let a: f64 = parse_field(file, line, "a", f[2])?;
        let v: f64 = parse_field(file, line, "value", f[3])?;
        let e: f64 = parse_field(file, line, "stderr", f[4])?;
        match groups.iter_mut().find(|g| g.0 == stat) {
            Some(g) => g.1.push((t, a, v, e)),
            None => groups.push((stat, vec![(t, a, v, e)])),
        }
        Ok(())
    })?;
    let mut out = Vec::new();
    for (stat, entries) in groups {
        let mut t_grid: Vec<usize> = entries.iter().map(|e| e.0).collect();
        t_grid.sort_unstable();
        t_grid.dedup();
        let mut a_grid: Vec<f64> = entries.iter().map(|e| e.1).collect();
        a_grid.sort_by(f64::total_cmp);
        a_grid.dedup();
        let mut s = ScalingSurface::new(stat, &t_grid, &a_grid);
        for (t, a, v, e) in entries {
            let ti = s.t_index(t).expect("collected");
            let ai = a_grid.iter().position(|x| *x == a).expect("collected");
            s.value[ti][ai] = v;
            s.stderr[ti][ai] = e;
        }
        out.push(s);
    }
    Ok(out)
}

pub fn write_predictions_csv(rows: &[PredictionRow], file: &Path) -> Result<()> {
    let rows = rows.iter().map(|r| {
        [
            r.statistic.clone(),
            fmt_opt_f64(r.a),
            fmt_opt(r.n),
            fmt_f64(r.value),
        ]
    });
    write_atomic(file, &csv_bytes(&PREDICTION_HEADER, rows)?)
}

pub fn read_predictions_csv(file: &Path) -> Result<Vec<PredictionRow>> {
    let mut table = open_table(file, &PREDICTION_HEADER, &PREDICTION_HEADER)?;
    let mut out = Vec::new();
    table.for_each(file, |line, f| {
        out.push(PredictionRow {
            statistic: f[0].unwrap_or("").to_string(),
            a: parse_opt(file, line, "a", f[1])?,
            n: parse_opt(file, line, "n", f[2])?,
            value: parse_field(file, line, "value", f[3])?,
        });
        Ok(())
    })?;
    Ok(out)
}

/// A scalar measurement: exponents, ratios, flow rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredRow {
    pub statistic: String,
    pub a: Option<f64>,
    pub n: Option<u32>,
    pub value: f64,
    pub stderr: f64,
}

impl MeasuredRow {
    pub fn new(statistic: &str, a: Option<f64>, n: Option<u32>, value: f64, stderr: f64) -> Self {
        MeasuredRow {
            statistic: statistic.into(),
            a,
            n,
            value,
            stderr,
        }
    }
}

pub fn write_measured_csv(rows: &[MeasuredRow], file: &Path) -> Result<()> {
    let rows = rows.iter().map(|r| {
        [
            r.statistic.clone(),
            fmt_opt_f64(r.a),
            fmt_opt(r.n),
            fmt_f64(r.value),
            fmt_f64(r.stderr),
        ]
    });
    write_atomic(file, &csv_bytes(&MEASURED_HEADER, rows)?)
}

pub fn read_measured_csv(file: &Path) -> Result<Vec<MeasuredRow>> {
    let mut table = open_table(file, &MEASURED_HEADER, &MEASURED_HEADER)?;
    let mut out = Vec::new();
    table.for_each(file, |line, f| {
        out.push(MeasuredRow {
            statistic: f[0].unwrap_or("").to_string(),
            a: parse_opt(file, line, "a", f[1])?,
            n: parse_opt(file, line, "n", f[2])?,
            value: parse_field(file, line, "value", f[3])?,
            stderr: parse_field(file, line, "stderr", f[4])?,
        });
        Ok(())
    })?;
    Ok(out)
}

/// One fitted power law with its labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentRow {
    pub statistic: String,
    pub a: Option<f64>,
    pub n: Option<u32>,
    pub fit: ExponentFit,
}

pub fn write_exponents_csv(rows: &[ExponentRow], file: &Path) -> Result<()> {
    let rows = rows.iter().map(|r| {
        [
            r.statistic.clone(),
            fmt_opt_f64(r.a),
            fmt_opt(r.n),
            fmt_f64(r.fit.exponent),
            fmt_f64(r.fit.exponent_stderr),
            fmt_f64(r.fit.prefactor),
            fmt_opt_f64(r.fit.offset),
            fmt_f64(r.fit.r_squared),
            fmt_f64(r.fit.fit_range.0),
            fmt_f64(r.fit.fit_range.1),
            r.fit.n_points.to_string(),
        ]
    });
    write_atomic(file, &csv_bytes(&EXPONENT_HEADER, rows)?)
}

pub fn read_exponents_csv(file: &Path) -> Result<Vec<ExponentRow>> {
    let mut table = open_table(file, &EXPONENT_HEADER, &EXPONENT_HEADER)?;
    let mut out = Vec::new();
    table.for_each(file, |l, f| {
        let num = |c: usize, name: &str| parse_field::<f64>(file, l, name, f[c]);
        out.push(ExponentRow {
            statistic: f[0].unwrap_or("").to_string(),
            a: parse_opt(file, l, "a", f[1])?,
            n: parse_opt(file, l, "n", f[2])?,
            fit: ExponentFit {
                exponent: num(3, "exponent")?,
                exponent_stderr: num(4, "exponent_stderr")?,
                prefactor: num(5, "prefactor")?,
                offset: parse_opt(file, l, "offset", f[6])?,
                r_squared: num(7, "r_squared")?,
                fit_range: (num(8, "fit_lo")?, num(9, "fit_hi")?),
                n_points: parse_field(file, l, "n_points", f[10])?,
            },
        });
        Ok(())
    })?;
    Ok(out)
}

/// Writes any table of pre-formatted string rows.
pub fn write_table_csv(header: &[&str], rows: &[Vec<String>], file: &Path) -> Result<()> {
    write_atomic(file, &csv_bytes(header, rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [
            0.1,
            1.0 / 3.0,
            1e-300,
            123456789.123456789,
            -2.5e17,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert!(fmt_f64(f64::NAN).parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn sidecar_names() {
        let (r, m) = sidecar_paths(Path::new("/x/run/tape.csv"));
        assert_eq!(r, Path::new("/x/run/tape.metaorders.csv"));
        assert_eq!(m, Path::new("/x/run/tape.meta.json"));
    }
}
