#![no_main]
use endscatter::geometry::{LineGeometry, ManifoldModel, Potential};
use endscatter::modes::{read_mode_csv, Gauge, ModeFunction};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(rows) = read_mode_csv(data) else {
        return;
    };
    let model = ManifoldModel::line(20.0, Potential::Zero);
    let geom = LineGeometry::new(&model).unwrap();
    let _ = ModeFunction::from_rows(&rows, &geom, Gauge::HalfDensity);
});
