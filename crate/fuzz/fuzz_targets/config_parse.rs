//! Run-configuration INI parser must never panic, whatever the bytes.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(mut cfg) = cbf2d::config::RunConfig::from_ini(text) {
            // Accepted configs must survive the render -> reparse round trip.
            let rendered = cfg.to_ini_string();
            let reparsed = cbf2d::config::RunConfig::from_ini(&rendered)
                .expect("rendered config must reparse");
            assert_eq!(rendered, reparsed.to_ini_string());
            // Resolving the case only errs for unknown names or bad physics.
            let _ = cfg.resolve_case();
        }
    }
});
