//! Matrix Market I/O: `coordinate real {general|symmetric}` matrices and
//! `array real general` vectors.

use std::io::{BufRead, Write};

use super::sparse::SparseMat;
use crate::error::{Error, Result};

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("Matrix Market line {line}: {msg}"))
}

/// Writes `mat` in coordinate format. With `symmetric`, only the lower triangle
/// is written; the caller is responsible for the matrix actually being symmetric.
pub fn write_matrix<W: Write>(mat: &SparseMat, symmetric: bool, mut out: W) -> Result<()> {
    let kind = if symmetric { "symmetric" } else { "general" };
    let entries: Vec<_> = mat.triplets().filter(|&(r, c, _)| !symmetric || c <= r).collect();
    writeln!(out, "%%MatrixMarket matrix coordinate real {kind}")?;
    writeln!(out, "{} {} {}", mat.n_rows(), mat.n_cols(), entries.len())?;
    for (r, c, v) in entries {
        writeln!(out, "{} {} {:.17e}", r + 1, c + 1, v)?;
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(input: R) -> Result<SparseMat> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let header = header?.to_ascii_lowercase();
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix coordinate ...'"));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(parse_err(1, format!("unsupported field type '{}'", fields[3])));
    }
    let symmetric = match fields[4] {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let mut it = t.split_whitespace();
        let mut next_usize = |what: &str| -> Result<usize> {
            it.next()
                .ok_or_else(|| parse_err(i + 1, format!("missing {what}")))?
                .parse::<usize>()
                .map_err(|e| parse_err(i + 1, e))
        };
        match size {
            None => {
                let (r, c, nnz) = (next_usize("rows")?, next_usize("cols")?, next_usize("nnz")?);
                size = Some((r, c, nnz));
                entries.reserve(nnz * if symmetric { 2 } else { 1 });
            }
            Some((nr, nc, _)) => {
                let (r, c) = (next_usize("row")?, next_usize("col")?);
                let v: f64 = it
                    .next()
                    .ok_or_else(|| parse_err(i + 1, "missing value"))?
                    .parse()
                    .map_err(|e| parse_err(i + 1, e))?;
                if r == 0 || c == 0 || r > nr || c > nc {
                    return Err(parse_err(i + 1, format!("index ({r}, {c}) out of range")));
                }
                entries.push((r - 1, c - 1, v));
                if symmetric && r != c {
                    entries.push((c - 1, r - 1, v));
                }
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or_else(|| parse_err(2, "missing size line"))?;
    let stored = if symmetric { entries.iter().filter(|(r, c, _)| c <= r).count() } else { entries.len() };
    if stored != nnz {
        return Err(Error::Parse(format!("expected {nnz} entries, found {stored}")));
    }
    Ok(SparseMat::from_triplets(nr, nc, entries))
}

pub fn write_vector<W: Write>(v: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "%%MatrixMarket matrix array real general")?;
    writeln!(out, "{} 1", v.len())?;
    for x in v {
        writeln!(out, "{x:.17e}")?;
    }
    Ok(())
}

pub fn read_vector<R: BufRead>(input: R) -> Result<Vec<f64>> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    if !header?.to_ascii_lowercase().starts_with("%%matrixmarket matrix array real") {
        return Err(parse_err(1, "expected an array header"));
    }
    let mut len: Option<usize> = None;
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        if len.is_none() {
            let dims: Vec<usize> =
                t.split_whitespace().map(|s| s.parse().map_err(|e| parse_err(i + 1, e))).collect::<Result<_>>()?;
            if dims.len() != 2 || dims[1] != 1 {
                return Err(parse_err(i + 1, "expected 'n 1'"));
            }
            len = Some(dims[0]);
        } else {
            out.push(t.parse().map_err(|e| parse_err(i + 1, e))?);
        }
    }
    match len {
        Some(n) if n == out.len() => Ok(out),
        Some(n) => Err(Error::Parse(format!("expected {n} values, found {}", out.len()))),
        None => Err(parse_err(2, "missing size line")),
    }
}
