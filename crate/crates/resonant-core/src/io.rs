//! File formats: coordinate-format matrices and ASCII vector files.
//!
//! Matrix files: a header line `dim n nnz k` followed by `k` lines of
//! `row col value` triplets (0-based indices). When only one triangle of a
//! symmetric pair is listed, the mirror entry is filled in.
//!
//! Vector files: a header line `dim n` followed by one float per line.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result, SelfAdjointOperator};

fn parse_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Reads a coordinate-format matrix file into a validated operator.
pub fn read_coo_matrix(path: &Path, symmetry_tol: f64) -> Result<SelfAdjointOperator> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, "empty file"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "dim" || parts[2] != "nnz" {
        return Err(parse_err(path, "header must be `dim n nnz k`"));
    }
    let n: usize = parts[1]
        .parse()
        .map_err(|e| parse_err(path, format!("bad dim: {e}")))?;
    let k: usize = parts[3]
        .parse()
        .map_err(|e| parse_err(path, format!("bad nnz: {e}")))?;
    if n == 0 {
        return Err(parse_err(path, "dim must be >= 1"));
    }

    let mut m = DMatrix::zeros(n, n);
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut count = 0usize;
    for (lineno, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 3 {
            return Err(parse_err(
                path,
                format!("line {}: expected `row col value`", lineno + 2),
            ));
        }
        let i: usize = cols[0]
            .parse()
            .map_err(|e| parse_err(path, format!("line {}: {e}", lineno + 2)))?;
        let j: usize = cols[1]
            .parse()
            .map_err(|e| parse_err(path, format!("line {}: {e}", lineno + 2)))?;
        let v: f64 = cols[2]
            .parse()
            .map_err(|e| parse_err(path, format!("line {}: {e}", lineno + 2)))?;
        if i >= n || j >= n {
            return Err(parse_err(
                path,
                format!("line {}: index ({i}, {j}) out of range for dim {n}", lineno + 2),
            ));
        }
        m[(i, j)] = v;
        seen.insert((i, j));
        count += 1;
    }
    if count != k {
        return Err(parse_err(
            path,
            format!("header promises {k} entries, file has {count}"),
        ));
    }
    // Mirror entries whose transpose was not listed.
    for &(i, j) in seen.clone().iter() {
        if i != j && !seen.contains(&(j, i)) {
            m[(j, i)] = m[(i, j)];
            seen.insert((j, i));
        }
    }
    SelfAdjointOperator::new(m, symmetry_tol)
}

/// Writes a vector as `dim n` followed by one float per line (shortest
/// round-trip decimal formatting, so the file is byte-deterministic).
pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    let mut out = String::with_capacity(16 * (v.len() + 1));
    out.push_str(&format!("dim {}\n", v.len()));
    for x in v.iter() {
        out.push_str(&format!("{x}\n"));
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads a vector file written by [`write_vector`].
pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, "empty file"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 2 || parts[0] != "dim" {
        return Err(parse_err(path, "header must be `dim n`"));
    }
    let n: usize = parts[1]
        .parse()
        .map_err(|e| parse_err(path, format!("bad dim: {e}")))?;
    let values: Vec<f64> = lines
        .enumerate()
        .map(|(lineno, l)| {
            l.parse::<f64>()
                .map_err(|e| parse_err(path, format!("line {}: {e}", lineno + 2)))
        })
        .collect::<Result<_>>()?;
    if values.len() != n {
        return Err(parse_err(
            path,
            format!("header promises {n} values, file has {}", values.len()),
        ));
    }
    Ok(DVector::from_vec(values))
}
