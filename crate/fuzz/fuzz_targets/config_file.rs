#![no_main]

use evoxplain::config::ConfigFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = ConfigFile::parse(text) {
        for key in config.keys() {
            assert!(!key.is_empty());
            let _ = config.get::<f64>(key);
        }
    }
});
