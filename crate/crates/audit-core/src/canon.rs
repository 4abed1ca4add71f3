//! Canonical JSON emission and input digests.
//!
//! Reports are byte-reproducible: keys sorted, LF line endings, floats
//! rounded to 6 significant digits. Non-finite floats serialize as `null`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Round to 6 significant digits and print the shortest decimal form.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return "null".to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(5 - exp);
    let rounded = (x * scale).round() / scale;
    format!("{rounded}")
}

fn write_value(out: &mut String, value: &Value, indent: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => {
            let _ = write!(out, "{}", Value::String(s.clone()));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                write_value(out, item, indent + 1);
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                let _ = write!(out, "{}: ", Value::String((*key).clone()));
                write_value(out, &map[*key], indent + 1);
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
    }
}

/// Serialize to canonical JSON: sorted keys, 2-space indent, trailing LF.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &value, 0);
    out.push('\n');
    Ok(out)
}

/// Write canonical JSON atomically: a partial file is never left behind.
pub fn write_canonical_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = to_canonical_json(value)?;
    write_atomic(path, text.as_bytes())
}

/// Write bytes via a temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = dir.to_path_buf();
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    tmp.push(format!(".{name}.tmp"));
    {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// SHA-256 hex digest of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex_string(&hasher.finalize()))
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_round_to_six_significant_digits() {
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(-0.0), "0");
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(0.3333333333), "0.333333");
        assert_eq!(format_float(-0.3333333333), "-0.333333");
        assert_eq!(format_float(123456789.0), "123457000");
        assert_eq!(format_float(0.5), "0.5");
        assert_eq!(format_float(1.0397207708399179), "1.03972");
        assert_eq!(format_float(f64::NAN), "null");
    }

    #[test]
    fn keys_are_sorted_and_output_is_stable() {
        let v = json!({"zeta": 1, "alpha": {"b": 2.5, "a": [1.0, 2.0]}});
        let a = to_canonical_json(&v).unwrap();
        let b = to_canonical_json(&v).unwrap();
        assert_eq!(a, b);
        let alpha_pos = a.find("\"alpha\"").unwrap();
        let zeta_pos = a.find("\"zeta\"").unwrap();
        assert!(alpha_pos < zeta_pos);
        assert!(a.ends_with('\n'));
        assert!(!a.contains('\r'));
    }

    #[test]
    fn atomic_write_creates_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        write_canonical_json(&path, &json!({"x": 1})).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"x\""));
        assert!(!dir.path().join(".report.json.tmp").exists());
    }
}
