//! Canonical JSON serialization: struct key order as declared, floats
//! printed with at most 6 significant digits and no trailing zeros. The
//! formatting is idempotent across a load/store cycle, which is what makes
//! report files byte-identical between runs.

use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Format a float with at most 6 significant digits, in plain decimal
/// notation, trimming trailing zeros.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        // canonical files never carry non-finite values; match serde_json
        return "null".to_string();
    }
    let neg = x < 0.0;
    let ax = x.abs();
    let exp = ax.log10().floor() as i32;
    let decimals = 5 - exp;
    let rounded = if decimals >= 0 {
        let factor = 10f64.powi(decimals);
        (ax * factor).round() / factor
    } else {
        let factor = 10f64.powi(-decimals);
        (ax / factor).round() * factor
    };
    let mut s = if decimals > 0 {
        format!("{:.*}", decimals as usize, rounded)
    } else {
        format!("{rounded:.0}")
    };
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if neg {
        format!("-{s}")
    } else {
        s
    }
}

struct CanonicalFormatter;

impl serde_json::ser::Formatter for CanonicalFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        writer.write_all(fmt_sig6(value).as_bytes())
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        writer.write_all(fmt_sig6(f64::from(value)).as_bytes())
    }
}

/// Serialize a value to canonical JSON (single line, no trailing newline).
pub fn canonical_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFormatter);
    value.serialize(&mut ser).map_err(|e| Error::InvalidInput(format!(
        "serialization failed: {e}"
    )))?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Write a value as canonical JSON with a trailing newline.
pub fn write_canonical_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = canonical_json_string(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

/// Hex SHA-256 of a value's canonical JSON; used as config digests.
pub fn sha256_digest<T: Serialize>(value: &T) -> Result<String> {
    let s = canonical_json_string(value)?;
    Ok(hex::encode(Sha256::digest(s.as_bytes())))
}
