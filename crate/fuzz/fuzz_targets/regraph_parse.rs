#![no_main]

use libfuzzer_sys::fuzz_target;
use regraph::format::{parse_regraph, write_regraph};

fuzz_target!(|data: &[u8]| {
    if let Ok(g) = parse_regraph(data) {
        // The format is canonical: accepted input re-serializes to itself.
        assert_eq!(write_regraph(&g).as_bytes(), data);
    }
});
