use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use routebench::error::Error;
use routebench::pool::load_pool;
use routebench::profile_file::{calibrate, load_profile};
use routebench::tables::load_cells_csv;
use routebench_core::record::RECORD_KEYS;
use routebench_core::{RouteLabel, Stratum};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn default_pool_is_balanced() {
    let pool = load_pool(&data("default_pool.jsonl"), 324).unwrap();
    let mut counts: BTreeMap<(Stratum, RouteLabel), usize> = BTreeMap::new();
    for p in &pool {
        *counts.entry((p.stratum, p.ground_truth_route)).or_default() += 1;
    }
    assert_eq!(counts.len(), 12);
    assert!(counts.values().all(|&n| n == 27));
    let state: Vec<_> = pool.iter().filter(|p| p.state_sensitive).collect();
    assert_eq!(state.len(), 32);
    assert!(state
        .iter()
        .all(|p| p.stratum != Stratum::Simple && p.expected_state_behavior.is_some()));
}

fn write_pool(lines: &[String]) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pool.jsonl");
    std::fs::write(&path, lines.join("\n")).unwrap();
    (dir, path)
}

fn default_lines() -> Vec<String> {
    std::fs::read_to_string(data("default_pool.jsonl"))
        .unwrap()
        .lines()
        .map(String::from)
        .collect()
}

#[test]
fn pool_errors_name_the_line() {
    let mut lines = default_lines();
    lines[9] = "{not json".into();
    let (_d, path) = write_pool(&lines);
    match load_pool(&path, 324).unwrap_err() {
        Error::Malformed { line, .. } => assert_eq!(line, 10),
        e => panic!("{e}"),
    }

    let mut lines = default_lines();
    lines[2] = lines[2].replace(r#""ground_truth_route": "dev""#, r#""ground_truth_route": "ops""#);
    let (_d, path) = write_pool(&lines);
    assert!(matches!(
        load_pool(&path, 324).unwrap_err(),
        Error::Malformed { line: 3, .. }
    ));
}

#[test]
fn pool_shape_is_checked() {
    let (_d, path) = write_pool(&default_lines());
    assert!(load_pool(&path, 300).is_err());

    let mut lines = default_lines();
    let first = lines[0].clone();
    lines[1] = first;
    let (_d, path) = write_pool(&lines);
    let err = load_pool(&path, 324).unwrap_err().to_string();
    assert!(err.contains("p001"), "{err}");

    let (_d, path) = write_pool(&[String::new()]);
    assert!(load_pool(&path, 324).is_err());
}

#[test]
fn schema_document_matches_record() {
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data("control_record.schema.json")).unwrap()).unwrap();
    let required: Vec<&str> = schema["required"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(required, RECORD_KEYS);
    let props: Vec<&String> = schema["properties"].as_object().unwrap().keys().collect();
    assert_eq!(props.len(), RECORD_KEYS.len());
    let routes: Vec<&str> = schema["properties"]["route"]["enum"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    let ours: Vec<&str> = RouteLabel::ALL.iter().map(|r| r.as_str()).collect();
    assert_eq!(routes, ours);
    assert_eq!(schema["additionalProperties"], false);
}

#[test]
fn shipped_profile_is_the_calibrated_fixture() {
    let shipped = load_profile(&data("simulator_profile.json")).unwrap();
    let cells = load_cells_csv(&data("cell_means.csv")).unwrap();
    let pool = load_pool(&data("default_pool.jsonl"), 324).unwrap();
    let fresh = calibrate(&cells, &pool).unwrap();
    let a = serde_json::to_value(&shipped).unwrap();
    let b = serde_json::to_value(&fresh).unwrap();
    assert_close(&a, &b, "");
}

fn assert_close(a: &serde_json::Value, b: &serde_json::Value, at: &str) {
    use serde_json::Value;
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            assert!((x - y).abs() <= 1e-12, "{at}: {x} vs {y}");
        }
        (Value::Array(x), Value::Array(y)) => {
            assert_eq!(x.len(), y.len(), "{at}");
            for (i, (u, v)) in x.iter().zip(y).enumerate() {
                assert_close(u, v, &format!("{at}[{i}]"));
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            assert_eq!(x.keys().collect::<Vec<_>>(), y.keys().collect::<Vec<_>>(), "{at}");
            for (k, u) in x {
                assert_close(u, &y[k], &format!("{at}.{k}"));
            }
        }
        _ => assert_eq!(a, b, "{at}"),
    }
}

#[test]
fn default_config_loads() {
    let cfg = routebench::config::RunConfig::load(&data("default_config.json")).unwrap();
    assert_eq!(cfg.requests_per_combo, 324);
    assert_eq!(routebench_core::enumerate_matrix(&cfg.matrix).unwrap().len(), 48);
    assert!(cfg.simulator_profile.unwrap().is_file());
}
