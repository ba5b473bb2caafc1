//! Feed arbitrary JSON through the experiment-config parser; accepted
//! configs must survive a serialize/deserialize roundtrip.

#![no_main]

use dpfreq::experiment::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(config) = ExperimentConfig::from_json(text) else {
        return;
    };
    let json = serde_json::to_string(&config).expect("serialize");
    let again = ExperimentConfig::from_json(&json).expect("roundtrip");
    assert_eq!(again, config);
});
