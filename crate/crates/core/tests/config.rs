use impactflow::config::RunConfig;
use impactflow::Error;

fn key_of(text: &str) -> String {
    match RunConfig::from_json(text).unwrap_err() {
        Error::Config { key, .. } => key,
        e => panic!("expected a config error, got {e}"),
    }
}

#[test]
fn nested_unknown_key_carries_full_path() {
    assert_eq!(key_of(r#"{"model": {"nuu": 1.0}}"#), "model.nuu");
    assert_eq!(key_of(r#"{"horizon": 3}"#), "horizon");
}

#[test]
fn wrong_type_names_the_field() {
    assert_eq!(key_of(r#"{"model": {"nu": "fast"}}"#), "model.nu");
}

#[test]
fn kurtosis_range_must_be_ordered() {
    assert_eq!(
        key_of(r#"{"kurtosis_fit_range": [1000, 100]}"#),
        "kurtosis_fit_range"
    );
    assert_eq!(
        key_of(r#"{"kurtosis_fit_range": [0, 100]}"#),
        "kurtosis_fit_range"
    );
    let c = RunConfig::from_json(r#"{"kurtosis_fit_range": [1000, 16384]}"#).unwrap();
    assert_eq!(c.kurtosis_fit_range, Some([1000.0, 16384.0]));
    assert_eq!(RunConfig::from_json("{}").unwrap().kurtosis_fit_range, None);
}

#[test]
fn model_errors_are_prefixed() {
    assert_eq!(key_of(r#"{"model": {"mu1": 0.5}}"#), "model.mu1");
}

#[test]
fn hash_tracks_content() {
    let a = RunConfig::default();
    let mut b = a.clone();
    assert_eq!(a.hash(), b.hash());
    b.model.seed += 1;
    assert_ne!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn canonical_form_is_a_fixed_point() {
    let text = r#"{"horizon_trades": 5000, "a_grid": [0.0, 0.5], "model": {"Gamma_amp": 0.2}}"#;
    let c = RunConfig::from_json(text).unwrap();
    let again = RunConfig::from_json(&c.canonical_json()).unwrap();
    assert_eq!(c, again);
    assert_eq!(c.hash(), again.hash());
}

fn schema() -> serde_json::Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/config.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn keys(v: &serde_json::Value) -> Vec<String> {
    let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
    k.sort();
    k
}

#[test]
fn shipped_schema_lists_every_key() {
    let s = schema();
    let cfg = serde_json::to_value(RunConfig::default()).unwrap();
    assert_eq!(keys(&s["properties"]), keys(&cfg));
    assert_eq!(
        keys(&s["$defs"]["model"]["properties"]),
        keys(&cfg["model"])
    );
}

#[test]
fn shipped_schema_defaults_match() {
    let s = schema();
    let cfg = serde_json::to_value(RunConfig::default()).unwrap();
    for (k, v) in cfg.as_object().unwrap() {
        if k != "model" {
            assert_eq!(&s["properties"][k]["default"], v, "{k}");
        }
    }
    for (k, v) in cfg["model"].as_object().unwrap() {
        let d = &s["$defs"]["model"]["properties"][k]["default"];
        match (d.as_f64(), v.as_f64()) {
            (Some(a), Some(b)) => assert_eq!(a, b, "model.{k}"),
            _ => assert_eq!(d, v, "model.{k}"),
        }
    }
}
