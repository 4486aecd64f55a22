#![no_main]

use libfuzzer_sys::fuzz_target;
use mixgeo_core::bracketing::{read_jsonl, to_jsonl_string};

fuzz_target!(|data: &[u8]| {
    if let Ok(set) = read_jsonl(data) {
        let text = to_jsonl_string(&set);
        let back = read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back.brackets(), set.brackets());
    }
});
