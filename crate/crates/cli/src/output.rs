//! CSV rendering, checksums and the run manifest.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Locale-free number formatting: shortest round-trip decimal, switching to
/// scientific notation below `1e-4` in magnitude.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else if x != 0.0 && x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Rows of numbers under a fixed header.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: format!("{}\n", header.join(",")), columns: header.len() }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        assert_eq!(cells.len(), self.columns, "CSV row width");
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match *c {
                Cell::Int(n) => write!(self.text, "{n}").unwrap(),
                Cell::Num(x) => self.text.push_str(&fmt_num(x)),
            }
        }
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Cell {
    Int(i64),
    Num(f64),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: String,
    pub version: String,
    pub seed: u64,
    pub workers: usize,
    /// Effective parameters after defaults and overrides.
    pub config: Value,
    pub started: chrono::DateTime<chrono::Utc>,
    pub finished: chrono::DateTime<chrono::Utc>,
    pub outputs: Vec<OutputRecord>,
    pub summary: Value,
}

/// Writes `bytes` to `dir/name` and returns its checksum record.
pub fn write_output(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<OutputRecord> {
    std::fs::write(dir.join(name), bytes)?;
    Ok(OutputRecord { file: name.to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(-2.0), "-2");
        assert_eq!(fmt_num(1e-4), "0.0001");
        assert_eq!(fmt_num(3.2e-5), "3.2e-5");
        assert_eq!(fmt_num(-7.5e-7), "-7.5e-7");
        assert_eq!(fmt_num(f64::NAN), "NaN");
        for x in [0.1, 1.0 / 3.0, 6.02e23, 1.5e-300, -9.99e-5] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_layout() {
        let mut csv = Csv::new(&["step", "t"]);
        csv.row(&[Cell::Int(1), Cell::Num(0.5)]);
        assert_eq!(String::from_utf8(csv.into_bytes()).unwrap(), "step,t\n1,0.5\n");
    }

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_round_trip() {
        let now = chrono::Utc::now();
        let m = RunManifest {
            kind: "renewal".into(),
            version: "0.1.0".into(),
            seed: 3,
            workers: 1,
            config: serde_json::json!({"p_m": 0.5}),
            started: now,
            finished: now,
            outputs: vec![OutputRecord { file: "a.csv".into(), bytes: 3, sha256: sha256_hex(b"abc") }],
            summary: Value::Null,
        };
        let text = serde_json::to_string_pretty(&m).unwrap();
        assert_eq!(serde_json::from_str::<RunManifest>(&text).unwrap(), m);
    }
}
