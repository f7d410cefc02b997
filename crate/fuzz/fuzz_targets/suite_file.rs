#![no_main]

use evoxplain::bench::Suite;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(suite) = Suite::parse(text) {
        assert!(!suite.scenarios.is_empty());
    }
});
