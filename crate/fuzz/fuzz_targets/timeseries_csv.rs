//! Time-series CSV parser must never panic, whatever the bytes.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(series) = cbf2d::io::parse_time_series_csv(text) {
            // Accepted series must round-trip through the writer.
            let rendered = cbf2d::io::time_series_to_csv(&series);
            let reparsed = cbf2d::io::parse_time_series_csv(&rendered)
                .expect("rendered series must reparse");
            assert_eq!(series.len(), reparsed.len());
        }
    }
});
