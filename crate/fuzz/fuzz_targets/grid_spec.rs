#![no_main]
use endscatter::config::GridSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(g) = data.parse::<GridSpec>() {
        assert!(g.n >= 8 && g.r_max.is_finite());
    }
});
