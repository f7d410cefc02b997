#![no_main]

use evoxplain::classifier::{parse_error_body, parse_health_response};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(body) = std::str::from_utf8(data) else { return };
    if let Ok(k) = parse_health_response(body) {
        assert!(k >= 2);
    }
    let _ = parse_error_body(body);
});
