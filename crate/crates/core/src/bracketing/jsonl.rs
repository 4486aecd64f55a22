//! JSON-lines form of a [`BracketSet`]: a header line, then one bracket per line.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::lattice::{Bracket, BracketSet, LatticeNorm};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    scale: f64,
    norm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    provenance: String,
    count: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    lower: Vec<f64>,
    upper: Vec<f64>,
    size: f64,
    provenance: String,
}

/// Recorded sizes must match recomputation to this relative tolerance.
const SIZE_RTOL: f64 = 1e-9;

pub fn write_jsonl<W: Write>(set: &BracketSet, mut out: W) -> Result<()> {
    let weights = match set.norm() {
        LatticeNorm::WeightedL2(w) => Some(w.to_vec()),
        _ => None,
    };
    let header = Header {
        scale: set.scale(),
        norm: set.norm().tag().to_string(),
        weights,
        provenance: set.provenance().to_string(),
        count: set.len(),
    };
    let io = Error::Io;
    let ser = |e: serde_json::Error| Error::Io(e.into());
    serde_json::to_writer(&mut out, &header).map_err(ser)?;
    out.write_all(b"\n").map_err(io)?;
    for b in set.brackets() {
        let line = Line {
            lower: b.lower().to_vec(),
            upper: b.upper().to_vec(),
            size: b.size(),
            provenance: set.provenance().to_string(),
        };
        serde_json::to_writer(&mut out, &line).map_err(ser)?;
        out.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}

pub fn to_jsonl_string(set: &BracketSet) -> String {
    let mut buf = Vec::new();
    write_jsonl(set, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

fn parse_norm(tag: &str, weights: Option<Vec<f64>>) -> Result<LatticeNorm> {
    let norm = match (tag, weights) {
        ("l1", None) => LatticeNorm::L1,
        ("l2", None) => LatticeNorm::L2,
        ("sup", None) => LatticeNorm::Sup,
        ("weighted-l2", Some(w)) => {
            if w.is_empty() || w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::Parse("weights must be finite and nonnegative".into()));
            }
            LatticeNorm::WeightedL2(Arc::from(w))
        }
        ("weighted-l2", None) => return Err(Error::Parse("weighted-l2 needs weights".into())),
        (t, Some(_)) if ["l1", "l2", "sup"].contains(&t) => {
            return Err(Error::Parse(format!("norm {t} takes no weights")))
        }
        (t, _) => return Err(Error::Parse(format!("unknown norm {t:?}"))),
    };
    Ok(norm)
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<BracketSet> {
    let mut lines = input.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let (_, first) = lines.next().ok_or_else(|| Error::Parse("empty bracket file".into()))?;
    let first = first.map_err(Error::Io)?;
    let header: Header =
        serde_json::from_str(&first).map_err(|e| Error::Parse(format!("line 1: {e}")))?;
    let norm = parse_norm(&header.norm, header.weights)?;
    let mut brackets = Vec::new();
    for (no, line) in lines {
        let line = line.map_err(Error::Io)?;
        let rec: Line =
            serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {no}: {e}")))?;
        let b = Bracket::new(rec.lower, rec.upper, &norm)
            .map_err(|e| Error::Parse(format!("line {no}: {e}")))?;
        if !((b.size() - rec.size).abs() <= SIZE_RTOL * b.size().max(rec.size).max(1e-300)) {
            return Err(Error::Parse(format!(
                "line {no}: recorded size {} differs from {}",
                rec.size,
                b.size()
            )));
        }
        brackets.push(b);
    }
    if brackets.len() != header.count {
        return Err(Error::Parse(format!(
            "header announces {} brackets, found {}",
            header.count,
            brackets.len()
        )));
    }
    BracketSet::new(brackets, header.scale, norm, header.provenance)
}

pub fn parse_jsonl(text: &str) -> Result<BracketSet> {
    read_jsonl(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(norm: LatticeNorm) -> BracketSet {
        let b1 = Bracket::new(vec![0.0, 0.0], vec![0.5, 0.25], &norm).unwrap();
        let b2 = Bracket::new(vec![-1.0, 0.1], vec![-0.75, 0.2], &norm).unwrap();
        BracketSet::new(vec![b1, b2], 1.0, norm, "unit-test").unwrap()
    }

    #[test]
    fn round_trip_all_norms() {
        for norm in [
            LatticeNorm::L1,
            LatticeNorm::L2,
            LatticeNorm::Sup,
            LatticeNorm::WeightedL2(Arc::from(vec![0.5, 2.0])),
        ] {
            let set = sample(norm.clone());
            let text = to_jsonl_string(&set);
            let back = parse_jsonl(&text).unwrap();
            assert_eq!(back.brackets(), set.brackets());
            assert_eq!(back.norm(), &norm);
            assert_eq!(back.provenance(), "unit-test");
        }
    }

    #[test]
    fn rejects_tampered_size_and_count() {
        let text = to_jsonl_string(&sample(LatticeNorm::L2));
        let bad = text.replacen("\"size\":0.5590169943749475", "\"size\":0.1", 1);
        assert_ne!(bad, text);
        assert!(matches!(parse_jsonl(&bad), Err(Error::Parse(_))));
        let short: String = text.lines().take(2).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_jsonl(&short), Err(Error::Parse(_))));
        assert!(parse_jsonl("").is_err());
        assert!(parse_jsonl("{\"scale\":1}\n").is_err());
    }
}
