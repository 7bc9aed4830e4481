//! Replays the checked-in fuzz corpus through the same parser entry points as
//! the fuzz targets, so a seed that once crashed stays covered on stable.

use endscatter::config::{parse_lambda_list, parse_model, ExperimentConfig, GridSpec};
use endscatter::geometry::{LineGeometry, ManifoldModel, Potential};
use endscatter::modes::{read_mode_csv, Gauge, ModeFunction};
use std::path::PathBuf;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let b = std::fs::read(&p).unwrap();
            (p, b)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(b: &[u8]) -> Option<&str> {
    std::str::from_utf8(b).ok()
}

#[test]
fn model_json_seeds() {
    let mut ok = 0;
    for (_, b) in seeds("model_json") {
        if let Some(Ok(m)) = text(&b).map(parse_model) {
            ok += 1;
            if !m.is_parabolic() {
                LineGeometry::new(&m).unwrap();
            }
        }
    }
    assert!(ok >= 4);
}

#[test]
fn experiment_config_seeds() {
    let mut valid = 0;
    for (p, b) in seeds("experiment_config") {
        if let Some(Ok(cfg)) = text(&b).map(ExperimentConfig::from_json) {
            assert_eq!(cfg.hash().len(), 64);
            if cfg.validate().is_ok() {
                valid += 1;
            } else {
                assert!(p.ends_with("empty_lambda.json"), "{}", p.display());
            }
        }
    }
    assert_eq!(valid, 3);
}

#[test]
fn grid_spec_seeds() {
    for (p, b) in seeds("grid_spec") {
        let parsed = text(&b).map(|s| s.parse::<GridSpec>());
        let name = p.file_name().unwrap().to_str().unwrap();
        match name {
            "basic" | "reordered" => assert!(matches!(parsed, Some(Ok(_))), "{name}"),
            _ => assert!(!matches!(parsed, Some(Ok(_))), "{name}"),
        }
    }
}

#[test]
fn lambda_list_seeds() {
    for (p, b) in seeds("lambda_list") {
        let parsed = text(&b).map(parse_lambda_list);
        let name = p.file_name().unwrap().to_str().unwrap();
        match name {
            "list" | "range" => assert_eq!(parsed.unwrap().unwrap().len(), 4, "{name}"),
            _ => assert!(parsed.unwrap().is_err(), "{name}"),
        }
    }
}

#[test]
fn mode_csv_seeds() {
    let model = ManifoldModel::line(20.0, Potential::Zero);
    let geom = LineGeometry::new(&model).unwrap();
    let mut parsed = 0;
    for (_, b) in seeds("mode_csv") {
        if let Ok(rows) = read_mode_csv(b.as_slice()) {
            parsed += 1;
            let _ = ModeFunction::from_rows(&rows, &geom, Gauge::HalfDensity);
        }
    }
    assert_eq!(parsed, 1);
}
