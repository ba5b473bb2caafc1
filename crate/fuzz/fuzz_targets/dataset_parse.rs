//! Feed arbitrary text through the dataset parser; accepted inputs must
//! roundtrip through write/parse and yield a mass-1 histogram.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(dataset) = dpfreq::data::Dataset::parse(text) else {
        return;
    };
    let again = dpfreq::data::Dataset::parse(&dataset.write()).expect("roundtrip");
    assert_eq!(again.items(), dataset.items());
    assert_eq!(again.n_items(), dataset.n_items());
    if !dataset.items().is_empty() {
        let mass: f64 = dataset.normalized_histogram().iter().sum();
        assert!((mass - 1.0).abs() < 1e-9);
    }
});
