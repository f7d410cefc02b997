#![no_main]

use evoxplain::classifier::{parse_predict_response, REMOTE_SUM_TOLERANCE};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(body) = std::str::from_utf8(data) else { return };
    if let Ok(resp) = parse_predict_response(body, None) {
        let p = resp.probabilities.probs();
        assert!(p.len() >= 2);
        assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() <= REMOTE_SUM_TOLERANCE);
        if let Some(labels) = &resp.labels {
            assert_eq!(labels.len(), p.len());
        }
    }
});
