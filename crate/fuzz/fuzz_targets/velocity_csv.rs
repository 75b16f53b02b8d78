//! Velocity-field CSV parser must never panic, whatever the bytes.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(field) = cbf2d::io::parse_velocity_csv(text) {
            // Accepted fields must round-trip through the writer.
            let rendered = cbf2d::io::velocity_to_csv(&field);
            let reparsed = cbf2d::io::parse_velocity_csv(&rendered)
                .expect("rendered field must reparse");
            assert_eq!(field.grid(), reparsed.grid());
        }
    }
});
