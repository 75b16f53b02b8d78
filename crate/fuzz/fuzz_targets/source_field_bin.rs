//! Source-field container decoder must never panic, whatever the bytes.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((config, field)) = cbf2d::io::source_field_from_bytes(data) {
        // Accepted containers carry one profile per time level, all on the
        // same grid as the decoded axis promises.
        let grid = field.grid();
        for n in 0..config.n_times() {
            assert_eq!(field.at(n).grid(), grid);
        }
    }
});
