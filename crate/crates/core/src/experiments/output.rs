//! CSV and JSON emission with a provenance header.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Facts every emitted file carries.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub grid: String,
    pub c_star: Option<f64>,
}

impl Provenance {
    fn header_lines(&self) -> Vec<String> {
        let c = self.c_star.map_or_else(|| "none".to_string(), |c| c.to_string());
        vec![
            format!("# command={}", self.command),
            format!("# config_hash={}", self.config_hash),
            format!("# seed={}", self.seed),
            format!("# grid={}", self.grid),
            format!("# c_star={c}"),
        ]
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Numeric(format!("csv: {other:?}")),
    }
}

/// Writes `#` provenance lines, a header row and the rows.
pub fn write_csv<W: Write>(mut out: W, prov: &Provenance, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    for line in prov.header_lines() {
        writeln!(out, "{line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns).map_err(csv_err)?;
    for r in rows {
        if r.len() != columns.len() {
            return Err(Error::Shape(format!("row of {} fields for {} columns", r.len(), columns.len())));
        }
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, prov: &Provenance, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    write_csv(f, prov, columns, rows)
}

/// Pretty JSON of `{"provenance": …, "summary": …}` with a trailing newline.
pub fn summary_json<T: Serialize>(prov: &Provenance, summary: &T) -> Result<String> {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        provenance: &'a Provenance,
        summary: &'a T,
    }
    let mut s = serde_json::to_string_pretty(&Doc {
        provenance: prov,
        summary,
    })
    .map_err(|e| Error::Numeric(format!("summary does not serialize: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json_file<T: Serialize>(path: &Path, prov: &Provenance, summary: &T) -> Result<()> {
    std::fs::write(path, summary_json(prov, summary)?)?;
    Ok(())
}

/// Shortest round-trip decimal form.
pub fn fmt(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance {
            command: "t".into(),
            config_hash: "00ff".into(),
            seed: 7,
            grid: "g".into(),
            c_star: None,
        }
    }

    #[test]
    fn csv_has_header_then_rows() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &prov(), &["a", "b"], &[vec![fmt(0.1), fmt(2.0)]]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "# config_hash=00ff");
        assert_eq!(lines[4], "# c_star=none");
        assert_eq!(&lines[5..], ["a,b", "0.1,2"]);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let r = write_csv(Vec::new(), &prov(), &["a", "b"], &[vec!["1".into()]]);
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn json_is_deterministic() {
        let a = summary_json(&prov(), &vec![1.5, 2.0]).unwrap();
        let b = summary_json(&prov(), &vec![1.5, 2.0]).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"seed\": 7"));
    }
}
