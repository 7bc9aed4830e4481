#![no_main]
use endscatter::config::parse_model;
use endscatter::geometry::LineGeometry;
use libfuzzer_sys::fuzz_target;

// JSON text or a shorthand such as `parabolic(0.5)`.
fuzz_target!(|data: &str| {
    if let Ok(m) = parse_model(data) {
        if !m.is_parabolic() {
            let _ = LineGeometry::new(&m);
        }
    }
});
