#![no_main]
use endscatter::config::parse_lambda_list;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(v) = parse_lambda_list(data) {
        assert!(v.iter().all(|l| l.is_finite()));
    }
});
