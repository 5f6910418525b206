//! Complex Matrix Text (CMT) files.
//!
//! ```text
//! 2 2
//! 1.0000000000000000e0+0.0000000000000000e0j 2.5000000000000000e-1-1.0000000000000000e0j
//! ...
//! ```
//!
//! The first line holds `rows cols`, then one line per row with
//! whitespace-separated entries of the form `RE{+|-}IMj`. Entries are written
//! with 17 significant digits so a write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numkit::CMatrix;

pub fn format_entry(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:.16e}{}{:.16e}j", z.re, sign, z.im.abs())
}

pub fn parse_entry(token: &str) -> Option<Complex64> {
    let body = token
        .strip_suffix('j')
        .or_else(|| token.strip_suffix('i'))?;
    let bytes = body.as_bytes();
    // The imaginary sign is the last '+'/'-' that is neither leading nor part of an exponent.
    let split = (1..bytes.len()).rev().find(|&i| {
        (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E')
    })?;
    let re: f64 = body[..split].parse().ok()?;
    let im: f64 = body[split..].parse().ok()?;
    Some(Complex64::new(re, im))
}

pub fn to_string(m: &CMatrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_entry(m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn from_str(text: &str) -> Result<CMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing `rows cols` header".into(),
    })?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            line: hline,
            message: format!("bad header: {e}"),
        })?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse {
            line: hline,
            message: "header must be `rows cols`".into(),
        });
    };
    let mut m = CMatrix::zeros(rows, cols);
    for i in 0..rows {
        let (lno, line) = lines.next().ok_or(Error::Parse {
            line: hline + i + 1,
            message: format!("expected {rows} rows, found {i}"),
        })?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != cols {
            return Err(Error::Parse {
                line: lno,
                message: format!("expected {cols} entries, found {}", tokens.len()),
            });
        }
        for (j, t) in tokens.iter().enumerate() {
            let z = parse_entry(t).ok_or_else(|| Error::Parse {
                line: lno,
                message: format!("bad complex entry `{t}`"),
            })?;
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::Parse {
                    line: lno,
                    message: format!("non-finite entry `{t}`"),
                });
            }
            m[(i, j)] = z;
        }
    }
    if let Some((lno, _)) = lines.next() {
        return Err(Error::Parse {
            line: lno,
            message: "trailing data after last row".into(),
        });
    }
    Ok(m)
}

pub fn read(path: &Path) -> Result<CMatrix> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    from_str(&text)
}

pub fn write(path: &Path, m: &CMatrix) -> Result<()> {
    fs::write(path, to_string(m)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
