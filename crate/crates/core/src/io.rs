//! On-disk formats: point sets (text or binary) and f64 row blocks.
//!
//! Text point files start with `l1fd-points v1`, then a `<d> <n>` line, then
//! one line of d values per point. Binary blocks are `n: u64`, `k: u64`
//! followed by n·k little-endian f64 values in row-major order; binary point
//! files use the same layout with k = d.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::points::PointSet;

pub const TEXT_HEADER: &str = "l1fd-points v1";

pub fn points_to_text(points: &PointSet) -> String {
    let mut out = String::with_capacity(24 * points.coords().len() + 32);
    let _ = writeln!(out, "{TEXT_HEADER}");
    let _ = writeln!(out, "{} {}", points.dim(), points.len());
    for p in points.iter() {
        for (j, x) in p.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{x:.16e}");
        }
        out.push('\n');
    }
    out
}

fn format_err(detail: impl Into<String>) -> Error {
    Error::Format {
        what: "point file",
        detail: detail.into(),
    }
}

pub fn points_from_text(text: &str) -> Result<PointSet> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(TEXT_HEADER) {
        return Err(format_err(format!("missing `{TEXT_HEADER}` header")));
    }
    let shape = lines.next().ok_or_else(|| format_err("missing `<d> <n>` line"))?;
    let mut it = shape.split_whitespace().map(str::parse::<usize>);
    let (d, n) = match (it.next(), it.next(), it.next()) {
        (Some(Ok(d)), Some(Ok(n)), None) => (d, n),
        _ => return Err(format_err(format!("bad shape line `{shape}`"))),
    };
    let mut coords = Vec::with_capacity(d.saturating_mul(n).min(1 << 24));
    let mut rows = 0;
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = coords.len();
        for tok in line.split_whitespace() {
            coords.push(
                tok.parse::<f64>()
                    .map_err(|e| format_err(format!("line {}: `{tok}`: {e}", lineno + 3)))?,
            );
        }
        if coords.len() - before != d {
            return Err(format_err(format!(
                "line {} has {} values, expected {d}",
                lineno + 3,
                coords.len() - before
            )));
        }
        rows += 1;
    }
    if rows != n {
        return Err(format_err(format!("header announces {n} points, found {rows}")));
    }
    if n == 0 {
        return if d == 0 {
            Err(format_err("dimension must be positive"))
        } else {
            Ok(PointSet::empty(d))
        };
    }
    PointSet::new(d, coords)
}

pub fn block_to_bytes(rows: usize, cols: usize, values: &[f64]) -> Vec<u8> {
    debug_assert_eq!(rows * cols, values.len());
    let mut out = Vec::with_capacity(16 + 8 * values.len());
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for x in values {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

/// Parses a block, returning (rows, cols, values).
pub fn block_from_bytes(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let err = |detail: String| Error::Format {
        what: "vector block",
        detail,
    };
    if bytes.len() < 16 {
        return Err(err(format!("{} bytes is shorter than the header", bytes.len())));
    }
    let rows = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let expected = rows
        .checked_mul(cols)
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(16));
    if expected != Some(bytes.len() as u64) {
        return Err(err(format!("{rows}×{cols} block does not match {} bytes", bytes.len())));
    }
    let values = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((rows as usize, cols as usize, values))
}

pub fn points_to_bytes(points: &PointSet) -> Vec<u8> {
    block_to_bytes(points.len(), points.dim(), points.coords())
}

pub fn points_from_bytes(bytes: &[u8]) -> Result<PointSet> {
    let (n, d, values) = block_from_bytes(bytes)?;
    if d == 0 {
        return Err(format_err("dimension must be positive"));
    }
    if n == 0 {
        return Ok(PointSet::empty(d));
    }
    PointSet::new(d, values)
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads either format, deciding by the leading bytes.
pub fn read_points(path: &Path) -> Result<PointSet> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(TEXT_HEADER.as_bytes()) {
        let text = std::str::from_utf8(&bytes).map_err(|e| format_err(e.to_string()))?;
        points_from_text(text)
    } else {
        points_from_bytes(&bytes)
    }
}

/// Writes text unless the path ends in `.bin`.
pub fn write_points(path: &Path, points: &PointSet) -> Result<()> {
    if path.extension().is_some_and(|e| e == "bin") {
        write_bytes(path, &points_to_bytes(points))
    } else {
        write_bytes(path, points_to_text(points).as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PointSet {
        PointSet::from_rows(3, &[[0.1, -2.5e-300, 1.0 / 3.0], [f64::MAX, 0.0, -7.25]]).unwrap()
    }

    #[test]
    fn text_round_trip_is_exact() {
        let p = sample();
        let text = points_to_text(&p);
        assert!(text.starts_with("l1fd-points v1\n3 2\n"));
        assert_eq!(points_from_text(&text).unwrap(), p);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let p = sample();
        let bytes = points_to_bytes(&p);
        assert_eq!(bytes.len(), 16 + 8 * 6);
        assert_eq!(points_from_bytes(&bytes).unwrap(), p);
    }

    #[test]
    fn malformed_inputs() {
        assert!(points_from_text("nope\n").is_err());
        assert!(points_from_text("l1fd-points v1\n2 1\n1.0\n").is_err());
        assert!(points_from_text("l1fd-points v1\n2 2\n1.0 2.0\n").is_err());
        assert!(points_from_text("l1fd-points v1\n1 1\nabc\n").is_err());
        assert!(block_from_bytes(&[0u8; 15]).is_err());
        let mut b = block_to_bytes(1, 2, &[1.0, 2.0]);
        b.pop();
        assert!(block_from_bytes(&b).is_err());
    }

    #[test]
    fn files_by_extension() {
        let dir = tempfile::tempdir().unwrap();
        let p = sample();
        for name in ["a.txt", "a.bin"] {
            let path = dir.path().join(name);
            write_points(&path, &p).unwrap();
            assert_eq!(read_points(&path).unwrap(), p);
        }
    }
}
