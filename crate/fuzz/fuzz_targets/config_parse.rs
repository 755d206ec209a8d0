#![no_main]

use libfuzzer_sys::fuzz_target;
use regraph::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = RunConfig::from_text(data) {
        // Serialized config must parse back to the same config.
        let again = RunConfig::from_text(cfg.header("").as_bytes()).expect("header reparses");
        assert_eq!(again.to_pairs(), cfg.to_pairs());
    }
});
