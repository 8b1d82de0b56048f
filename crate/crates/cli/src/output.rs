//! Bit-stable CSV and JSON emission. Every file carries the format version
//! and the SHA-256 of the canonical config echo.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{Map, Number, Value};
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, FORMAT_VERSION};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn config_hash(config: &RunConfig) -> String {
    hex::encode(Sha256::digest(config.echo().as_bytes()))
}

/// Rewrites every float in `v` with 17 significant digits; non-finite
/// values become `null`.
fn fix_floats(v: Value) -> Value {
    match v {
        Value::Number(n) => {
            let text = n.to_string();
            if !text.contains(['.', 'e', 'E']) {
                return Value::Number(n);
            }
            match n.as_f64() {
                Some(f) if f.is_finite() => {
                    let fixed: Number =
                        serde_json::from_str(&fmt_num(f)).expect("formatted float parses as JSON");
                    Value::Number(fixed)
                }
                _ => Value::Null,
            }
        }
        Value::Array(a) => Value::Array(a.into_iter().map(fix_floats).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, fix_floats(v))).collect()),
        other => other,
    }
}

pub struct Emitter {
    dir: PathBuf,
    hash: String,
    echo: String,
    written: Vec<PathBuf>,
}

impl Emitter {
    pub fn new(dir: &Path, config: &RunConfig) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash: config_hash(config),
            echo: config.echo(),
            written: Vec::new(),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn csv<I>(&mut self, name: &str, columns: &[&str], rows: I) -> io::Result<()>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        let mut text = format!(
            "# kpp-lab format_version={FORMAT_VERSION} config_sha256={}\n",
            self.hash
        );
        text.push_str(&columns.join(","));
        text.push('\n');
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_num(*v)).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        self.write(name, &text)
    }

    /// Writes `body` (an object) with the version, hash and config echo in front.
    pub fn json(&mut self, name: &str, body: Value) -> io::Result<()> {
        let mut out = Map::new();
        out.insert("format_version".into(), Value::from(FORMAT_VERSION));
        out.insert("config_sha256".into(), Value::from(self.hash.clone()));
        out.insert("config".into(), Value::from(self.echo.clone()));
        match fix_floats(body) {
            Value::Object(o) => out.extend(o),
            other => {
                out.insert("result".into(), other);
            }
        }
        let mut text =
            serde_json::to_string_pretty(&Value::Object(out)).map_err(io::Error::other)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn write(&mut self, name: &str, text: &str) -> io::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 2.0 / 3.0, -1e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_num(2.0), "2.0000000000000000e0");
        assert_eq!(fmt_num(f64::NAN), "nan");
    }

    #[test]
    fn json_floats_get_full_precision() {
        let v = fix_floats(serde_json::json!({ "a": 0.1, "n": 3, "bad": f64::NAN, "list": [1.5] }));
        let text = v.to_string();
        assert!(text.contains("\"a\":1.0000000000000001e-1"), "{text}");
        assert!(text.contains("\"n\":3"));
        assert!(text.contains("\"bad\":null"));
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
    }
}
