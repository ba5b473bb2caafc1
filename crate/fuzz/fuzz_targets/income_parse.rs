//! Feed arbitrary text through the income ingester; accepted inputs must
//! yield in-range interval items consistent with the report counts.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok((dataset, report)) = dpfreq::data::ingest_income_text(text, 100.0, 0) else {
        return;
    };
    assert_eq!(report.users as usize, dataset.items().len());
    for &item in dataset.items() {
        assert!(item >= 1 && item <= dataset.n_items());
    }
});
