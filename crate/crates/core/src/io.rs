//! System files and number formatting.
//!
//! A system file is a JSON object with keys `"A"`, `"B"`, `"Q"`, `"R"`,
//! `"S"` (and optionally `"K0"`), each a row-major array of rows:
//!
//! ```json
//! { "A": [[0.5]], "B": [[1.0]], "Q": [[1.0]], "R": [[1.0]], "S": [[0.0]] }
//! ```
//!
//! Unknown keys are rejected unless the caller asks for lax parsing.

use std::path::Path;

use nalgebra::DMatrix;
use serde_json::{Map, Value};

use crate::error::{mismatch, Error, Result};
use crate::model::LqrSystem;

/// Systems shipped with the crate, by name.
pub const BUNDLED: [(&str, &str); 3] = [
    ("paper3x3", include_str!("../data/paper3x3.json")),
    ("scalar_half", include_str!("../data/scalar_half.json")),
    (
        "scalar_unstable",
        include_str!("../data/scalar_unstable.json"),
    ),
];

pub fn bundled(name: &str) -> Option<SystemFile> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse_system(text, false).expect("bundled systems are valid"))
}

const KEYS: [&str; 6] = ["A", "B", "Q", "R", "S", "K0"];

/// A parsed system file.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemFile {
    pub system: LqrSystem,
    pub k0: Option<DMatrix<f64>>,
}

fn matrix_field(obj: &Map<String, Value>, key: &str) -> Result<Option<DMatrix<f64>>> {
    let Some(v) = obj.get(key) else {
        return Ok(None);
    };
    let rows = v
        .as_array()
        .ok_or_else(|| Error::Parse(format!("field `{key}`: expected an array of rows")))?;
    if rows.is_empty() {
        return Err(Error::Parse(format!("field `{key}`: no rows")));
    }
    let mut data = Vec::new();
    let mut width = None;
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| {
            Error::Parse(format!(
                "field `{key}` row {}: expected an array of numbers",
                i + 1
            ))
        })?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse(format!(
                    "field `{key}` row {}: {} entries, expected {w}",
                    i + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        for (j, x) in row.iter().enumerate() {
            let x = x.as_f64().filter(|x| x.is_finite()).ok_or_else(|| {
                Error::Parse(format!(
                    "field `{key}` entry ({}, {}): expected a finite number, found {x}",
                    i + 1,
                    j + 1
                ))
            })?;
            data.push(x);
        }
    }
    let ncols = width.unwrap_or(0);
    Ok(Some(DMatrix::from_row_slice(rows.len(), ncols, &data)))
}

/// Parses and validates a system document.
pub fn parse_system(text: &str, lax: bool) -> Result<SystemFile> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::Parse("top level must be a JSON object".into()))?;
    if !lax {
        if let Some(extra) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::Parse(format!(
                "unknown key `{extra}` (pass --lax to ignore extra keys)"
            )));
        }
    }
    let required = |key: &str| -> Result<DMatrix<f64>> {
        matrix_field(obj, key)?.ok_or_else(|| Error::Parse(format!("missing field `{key}`")))
    };
    let system = LqrSystem::new(
        required("A")?,
        required("B")?,
        required("Q")?,
        required("R")?,
        required("S")?,
    )?;
    let k0 = matrix_field(obj, "K0")?;
    if let Some(k0) = &k0 {
        if k0.shape() != (system.n_u(), system.n_x()) {
            return Err(mismatch("K0", (system.n_u(), system.n_x()), k0.shape()));
        }
    }
    Ok(SystemFile { system, k0 })
}

/// Reads a system file. A path that does not exist but whose file stem
/// names a bundled system (`examples/paper3x3`, `paper3x3.json`, ...)
/// resolves to that system.
pub fn load_system(path: impl AsRef<Path>, lax: bool) -> Result<SystemFile> {
    let path = path.as_ref();
    if !path.exists() {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        if let Some(found) = bundled(stem) {
            log::info!("{}: not on disk, using bundled `{stem}`", path.display());
            return Ok(found);
        }
    }
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_system(&text, lax)
}

fn rows(m: &DMatrix<f64>) -> Value {
    Value::Array(
        m.row_iter()
            .map(|r| Value::Array(r.iter().map(|&x| Value::from(x)).collect()))
            .collect(),
    )
}

/// Serializes a system (and optional `K0`); numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn write_system(sys: &LqrSystem, k0: Option<&DMatrix<f64>>) -> String {
    let mut obj = Map::new();
    obj.insert("A".into(), rows(sys.a()));
    obj.insert("B".into(), rows(sys.b()));
    obj.insert("Q".into(), rows(sys.q()));
    obj.insert("R".into(), rows(sys.r()));
    obj.insert("S".into(), rows(sys.s()));
    if let Some(k0) = k0 {
        obj.insert("K0".into(), rows(k0));
    }
    let mut out = serde_json::to_string_pretty(&Value::Object(obj)).expect("finite matrices");
    out.push('\n');
    out
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros removed,
/// exponent form outside `1e-4 <= |x| < 1e12`.
pub fn fmt_sig(x: f64) -> String {
    fmt_sig_digits(x, 12)
}

pub fn fmt_sig_digits(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rows of `m` as lines of space-separated 12-digit numbers.
pub fn fmt_matrix(m: &DMatrix<f64>) -> String {
    m.row_iter()
        .map(|r| r.iter().map(|&x| fmt_sig(x)).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n")
}
