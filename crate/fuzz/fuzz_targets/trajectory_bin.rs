//! Binary trajectory decoder must never panic, whatever the bytes.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(traj) = cbf2d::io::trajectory_from_bytes(data) {
        // Accepted containers must round-trip through the encoder.
        let rendered = cbf2d::io::trajectory_to_bytes(&traj);
        let reparsed = cbf2d::io::trajectory_from_bytes(&rendered)
            .expect("rendered container must reparse");
        assert_eq!(traj.config().n_times(), reparsed.config().n_times());
    }
});
