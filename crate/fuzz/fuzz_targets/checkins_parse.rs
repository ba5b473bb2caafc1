//! Feed arbitrary text through the check-in ingester; accepted inputs must
//! produce items inside the configured grid.

#![no_main]

use dpfreq::data::CheckinBinning;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let binning = CheckinBinning::default();
    let Ok((dataset, report)) = dpfreq::data::ingest_checkins_text(text, &binning) else {
        return;
    };
    assert_eq!(report.users as usize, dataset.items().len());
    assert!(report.rows_read >= report.users);
    assert!(dataset.n_items() <= binning.n_cells());
    for &item in dataset.items() {
        assert!(item >= 1 && item <= binning.n_cells());
    }
});
