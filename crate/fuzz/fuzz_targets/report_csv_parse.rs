#![no_main]

use libfuzzer_sys::fuzz_target;
use regraph::report::{build_report, parse_report_csv, Bands};

fuzz_target!(|data: &[u8]| {
    if let Ok(file) = parse_report_csv(data) {
        let _ = build_report(&[file], &[], &Bands::default());
    }
});
