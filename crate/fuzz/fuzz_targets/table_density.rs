#![no_main]

use libfuzzer_sys::fuzz_target;
use mixgeo_core::density::TabulatedDensity;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(t) = TabulatedDensity::parse(text) {
            for x in [-1e3, -1.0, 0.0, 0.5, 1.0, 1e3] {
                let v = t.eval(x)[0];
                assert!(v >= 0.0 && v.is_finite());
            }
        }
    }
});
