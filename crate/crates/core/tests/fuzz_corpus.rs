//! Replays the checked-in fuzz seeds through the parsers.

use std::fs;
use std::path::{Path, PathBuf};

use mixgeo_core::bracketing::{read_jsonl, to_jsonl_string};
use mixgeo_core::config::Config;
use mixgeo_core::density::TabulatedDensity;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn config_seeds_parse() {
    for (p, text) in seeds("config_toml") {
        let cfg = Config::parse_toml(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(Config::parse_json(&json).unwrap(), cfg);
    }
    for (p, text) in seeds("config_json") {
        Config::parse_json(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn table_seeds_parse_or_reject() {
    let mut accepted = 0;
    for (p, text) in seeds("table_density") {
        match TabulatedDensity::parse(&text) {
            Ok(t) => {
                accepted += 1;
                assert!(t.eval(0.0)[0] > 0.0, "{}", p.display());
            }
            Err(_) => assert!(p.ends_with("bad_order.txt"), "{}", p.display()),
        }
    }
    assert_eq!(accepted, 2);
}

#[test]
fn bracket_seeds_round_trip() {
    for (p, text) in seeds("bracket_jsonl") {
        match read_jsonl(text.as_bytes()) {
            Ok(set) => {
                let back = read_jsonl(to_jsonl_string(&set).as_bytes()).unwrap();
                assert_eq!(back.brackets(), set.brackets());
            }
            Err(_) => assert!(p.ends_with("inverted.jsonl"), "{}", p.display()),
        }
    }
}
