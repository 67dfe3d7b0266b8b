//! Matrix Market coordinate I/O (`real general` and `real symmetric`).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let text = fs::read_to_string(path)?;
    parse_matrix_market(&text)
}

pub fn parse_matrix_market(text: &str) -> Result<SparseMatrix> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::MatrixMarket("empty file".into()))?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::MatrixMarket(format!("malformed header: {header}")));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::MatrixMarket(format!(
            "unsupported format {}",
            tokens[2]
        )));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(Error::MatrixMarket(format!(
            "unsupported field {}",
            tokens[3]
        )));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => {
            return Err(Error::MatrixMarket(format!(
                "unsupported symmetry {other}"
            )))
        }
    };

    let mut body = lines
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('%'));
    let size_line = body
        .next()
        .ok_or_else(|| Error::MatrixMarket("missing size line".into()))?;
    let size: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::MatrixMarket(format!("bad size line '{size_line}': {e}")))?;
    let [n_rows, n_cols, nnz] = size[..] else {
        return Err(Error::MatrixMarket(format!("bad size line '{size_line}'")));
    };
    if symmetric && n_rows != n_cols {
        return Err(Error::MatrixMarket(
            "symmetric matrix must be square".into(),
        ));
    }

    let mut triplets = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
    let mut count = 0;
    for line in body {
        let mut it = line.split_whitespace();
        let (Some(r), Some(c), Some(v), None) = (it.next(), it.next(), it.next(), it.next())
        else {
            return Err(Error::MatrixMarket(format!("bad entry line '{line}'")));
        };
        let parse_idx = |s: &str, bound: usize| -> Result<usize> {
            let i: usize = s
                .parse()
                .map_err(|_| Error::MatrixMarket(format!("bad index '{s}'")))?;
            if i == 0 || i > bound {
                return Err(Error::MatrixMarket(format!(
                    "index {i} outside 1..={bound}"
                )));
            }
            Ok(i - 1)
        };
        let r = parse_idx(r, n_rows)?;
        let c = parse_idx(c, n_cols)?;
        let v: f64 = v
            .parse()
            .map_err(|_| Error::MatrixMarket(format!("bad value '{v}'")))?;
        if symmetric && c > r {
            return Err(Error::MatrixMarket(
                "symmetric file stores an upper-triangle entry".into(),
            ));
        }
        triplets.push((r, c, v));
        if symmetric && r != c {
            triplets.push((c, r, v));
        }
        count += 1;
    }
    if count != nnz {
        return Err(Error::MatrixMarket(format!(
            "header declares {nnz} entries, found {count}"
        )));
    }
    SparseMatrix::from_triplets(n_rows, n_cols, &triplets)
}

/// Writes `m` in `real general` coordinate format. Values use the shortest
/// representation that round-trips exactly.
pub fn write_matrix_market(m: &SparseMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_matrix_market(m))?;
    Ok(())
}

pub fn format_matrix_market(m: &SparseMatrix) -> String {
    let mut out = String::with_capacity(32 * (m.nnz() + 2));
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", m.n_rows(), m.n_cols(), m.nnz());
    for i in 0..m.n_rows() {
        for (j, v) in m.row(i) {
            let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton() {
        let m = parse_matrix_market(
            "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 2.5\n",
        )
        .unwrap();
        assert_eq!(m.get(0, 0), 2.5);
    }

    #[test]
    fn symmetric_expansion() {
        let m = parse_matrix_market(
            "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 3\n1 1 2\n2 1 1\n2 2 3\n",
        )
        .unwrap();
        assert_eq!(m.to_dense().values(), &[2.0, 1.0, 1.0, 3.0]);
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse_matrix_market("").is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix array real general\n1 1\n1\n").is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n")
            .is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n")
            .is_err());
        assert!(parse_matrix_market("hello\n").is_err());
    }

    #[test]
    fn roundtrip_exact() {
        let m = SparseMatrix::from_triplets(
            3,
            2,
            &[(0, 0, 0.1), (1, 1, -1.0 / 3.0), (2, 0, 1e-300), (2, 1, 7.0)],
        )
        .unwrap();
        let back = parse_matrix_market(&format_matrix_market(&m)).unwrap();
        assert_eq!(back, m);
    }
}
