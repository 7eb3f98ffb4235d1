use impactflow::config::RunConfig;
use impactflow::flow::simulate_tape;
use impactflow::io::*;
use impactflow::oracle::{PredictionRow, PredictionSet};
use impactflow::price::assemble_price_path;
use impactflow::{ModelParams, ObservationGrid, TradeTape};
use proptest::prelude::*;

#[test]
fn simulated_tape_round_trips_with_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tape.csv");
    let tape = simulate_tape(&ModelParams::default(), 3_000, 8).unwrap();
    write_tape_csv_with(&tape, &path, Some("abc")).unwrap();
    let back = read_tape_csv(&path).unwrap();
    assert_eq!(back, tape);
    let (reg, meta) = sidecar_paths(&path);
    assert!(reg.exists() && meta.exists());
}

#[test]
fn analysis_only_tape_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plain.csv");
    let tape =
        TradeTape::from_signs_volumes(vec![1, -1, -1, 1], vec![0.5, 2.0, 1e-3, 7.25]).unwrap();
    write_tape_csv(&tape, &path).unwrap();
    assert_eq!(read_tape_csv(&path).unwrap(), tape);
}

#[test]
fn header_only_columns_are_enough() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("min.csv");
    std::fs::write(
        &path,
        "trade_idx,time,sign,volume\n0,0.0,1,2.0\n1,0.5,-1,3.0\n",
    )
    .unwrap();
    let t = read_tape_csv(&path).unwrap();
    assert_eq!(t.sign, vec![1, -1]);
    assert!(t.metaorder_id.is_none() && t.price.is_none());
}

#[test]
fn bad_sign_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(
        &path,
        "trade_idx,time,sign,volume\n0,0.0,1,2.0\n1,0.5,0,3.0\n",
    )
    .unwrap();
    let e = read_tape_csv(&path).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    assert!(e.to_string().contains(":3:"), "{e}");
}

#[test]
fn price_path_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("price.csv");
    let p = ModelParams::default();
    let tape = simulate_tape(&p, 2_000, 3).unwrap();
    let path =
        assemble_price_path(&tape, &p, p.mode, &ObservationGrid::Regular { step: 10 }, 3).unwrap();
    write_price_csv(&path, &file).unwrap();
    let back = read_price_csv(&file, &tape).unwrap();
    assert_eq!(back.grid, path.grid);
    assert_eq!(back.total, path.total);
    assert_eq!(back.times, path.times);
}

#[test]
fn tables_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let measured = vec![
        MeasuredRow::new("sigma2_exponent", Some(0.25), Some(1), 1.4, 0.02),
        MeasuredRow::new("chi", None, None, 0.66, f64::NAN),
    ];
    let f = dir.path().join("measured.csv");
    write_measured_csv(&measured, &f).unwrap();
    let back = read_measured_csv(&f).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(back[0], measured[0]);
    assert!(back[1].stderr.is_nan());

    let cfg = RunConfig::default();
    let rows: Vec<PredictionRow> = PredictionSet::new(&cfg.model, &cfg.a_values(), 100.0)
        .unwrap()
        .rows();
    let f = dir.path().join("pred.csv");
    write_predictions_csv(&rows, &f).unwrap();
    let back = read_predictions_csv(&f).unwrap();
    assert_eq!(back.len(), rows.len());
    for (a, b) in back.iter().zip(&rows) {
        assert_eq!(a.statistic, b.statistic);
        assert_eq!(a.a, b.a);
        assert_eq!(a.n, b.n);
        assert!(a.value == b.value || (a.value.is_nan() && b.value.is_nan()));
    }
}

proptest! {
    #[test]
    fn float_text_is_lossless(x in any::<f64>()) {
        let s = fmt_f64(x);
        let y: f64 = s.parse().unwrap();
        prop_assert!(x == y || (x.is_nan() && y.is_nan()), "{} -> {}", x, s);
    }
}
