//! Output files carry the resolved config and the circuit-constants hash, so rerunning
//! the echoed config reproduces them byte for byte.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use photonic_coherence::circuit::constants_sha256;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Starts a CSV with `# config:` and `# constants_sha256:` comment lines and a header row.
pub fn csv_writer<C: Serialize>(path: &Path, config: &C, header: &[&str]) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# config: {}", serde_json::to_string(config)?)?;
    writeln!(out, "# constants_sha256: {}", constants_sha256())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

/// Formats an optional cell; absent values stay empty.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `{config, constants_sha256, ...fields}` as pretty JSON. Returns the SHA-256 of the bytes.
pub fn write_report<C: Serialize, B: Serialize>(path: &Path, config: &C, body: &B) -> Result<String, CliError> {
    let mut report = serde_json::Map::new();
    report.insert("config".into(), serde_json::to_value(config)?);
    report.insert("constants_sha256".into(), Value::String(constants_sha256()));
    match serde_json::to_value(body)? {
        Value::Object(fields) => report.extend(fields),
        other => {
            report.insert("result".into(), other);
        }
    }
    let mut bytes = serde_json::to_vec_pretty(&Value::Object(report))?;
    bytes.push(b'\n');
    std::fs::write(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

/// `dir/name.csv` becomes `dir/name.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Min and max of a column.
#[derive(Debug, Serialize)]
pub struct Extrema {
    pub min: f64,
    pub max: f64,
}

pub fn extrema(values: impl IntoIterator<Item = f64>) -> Option<Extrema> {
    values.into_iter().filter(|v| v.is_finite()).fold(None, |acc, v| {
        Some(match acc {
            None => Extrema { min: v, max: v },
            Some(e) => Extrema {
                min: e.min.min(v),
                max: e.max.max(v),
            },
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(Path::new("a/b.csv"), "summary.json"), PathBuf::from("a/b.summary.json"));
        assert_eq!(sibling(Path::new("b"), "meta.json"), PathBuf::from("b.meta.json"));
    }

    #[test]
    fn extrema_skip_non_finite() {
        let e = extrema([1.0, f64::NAN, -2.0, 4.0]).unwrap();
        assert_eq!((e.min, e.max), (-2.0, 4.0));
        assert!(extrema(Vec::new()).is_none());
    }

    #[test]
    fn reports_are_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        let a = write_report(&p, &serde_json::json!({"x": 1}), &serde_json::json!({"y": 2})).unwrap();
        let b = write_report(&p, &serde_json::json!({"x": 1}), &serde_json::json!({"y": 2})).unwrap();
        assert_eq!(a, b);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("\"constants_sha256\""));
        assert!(text.contains("\"y\": 2"));
    }
}
