#![no_main]

use libfuzzer_sys::fuzz_target;
use mixgeo_core::config::Config;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = Config::parse_json(text) {
            assert_eq!(cfg.hash(), cfg.clone().hash());
        }
    }
});
