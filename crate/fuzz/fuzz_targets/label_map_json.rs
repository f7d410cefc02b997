#![no_main]

use evoxplain::SuperpixelMap;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(map) = SuperpixelMap::from_json(text) {
        assert!(map.labels().iter().all(|&l| (l as usize) < map.ns()));
        let again = SuperpixelMap::from_json(&map.to_json().unwrap()).unwrap();
        assert_eq!(again, map);
    }
});
