#![no_main]

use evoxplain::Explanation;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(e) = Explanation::from_json(text) {
        let again = Explanation::from_json(&e.to_json(false).unwrap()).unwrap();
        assert_eq!(again.best, e.best);
        assert_eq!(again.history, e.history);
    }
});
