#![no_main]

use libfuzzer_sys::fuzz_target;
use mixgeo_core::config::Config;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = Config::parse_toml(text) {
            let json = serde_json::to_string(&cfg).unwrap();
            assert_eq!(Config::parse_json(&json).unwrap(), cfg);
        }
    }
});
