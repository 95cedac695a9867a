//! MatrixMarket coordinate I/O (`real general`, plus `pattern` and
//! `integer` on import).

use std::io::{BufRead, Write};

use super::CsrMatrix;
use crate::error::{Error, Result};

pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<CsrMatrix> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::MatrixMarket("empty input".into()))??;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::MatrixMarket(format!("bad header line: {header}")));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::MatrixMarket("only coordinate format is supported".into()));
    }
    let pattern = match tokens[3].as_str() {
        "real" | "integer" => false,
        "pattern" => true,
        other => return Err(Error::MatrixMarket(format!("unsupported field '{other}'"))),
    };
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(Error::MatrixMarket(format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let mut it = t.split_whitespace();
        let mut next_usize = |what: &str| -> Result<usize> {
            it.next()
                .ok_or_else(|| Error::MatrixMarket(format!("line {}: missing {what}", lineno + 2)))?
                .parse::<usize>()
                .map_err(|e| Error::MatrixMarket(format!("line {}: {what}: {e}", lineno + 2)))
        };
        match size {
            None => {
                let r = next_usize("rows")?;
                let c = next_usize("cols")?;
                let nnz = next_usize("entries")?;
                size = Some((r, c, nnz));
                triplets.reserve(nnz);
            }
            Some((nr, nc, _)) => {
                let i = next_usize("row")?;
                let j = next_usize("col")?;
                if i == 0 || j == 0 || i > nr || j > nc {
                    return Err(Error::MatrixMarket(format!(
                        "line {}: entry ({i}, {j}) outside 1..={nr} x 1..={nc}",
                        lineno + 2
                    )));
                }
                let v = if pattern {
                    1.0
                } else {
                    it.next()
                        .ok_or_else(|| {
                            Error::MatrixMarket(format!("line {}: missing value", lineno + 2))
                        })?
                        .parse::<f32>()
                        .map_err(|e| Error::MatrixMarket(format!("line {}: {e}", lineno + 2)))?
                };
                triplets.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (nr, nc, declared) = size.ok_or_else(|| Error::MatrixMarket("missing size line".into()))?;
    let read = if symmetric {
        triplets.iter().filter(|t| t.0 >= t.1).count()
    } else {
        triplets.len()
    };
    if read != declared {
        return Err(Error::MatrixMarket(format!(
            "size line declares {declared} entries, found {read}"
        )));
    }
    CsrMatrix::from_triplets(nr, nc, &triplets)
}

pub fn write_matrix_market<W: Write>(a: &CsrMatrix, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for (i, j, v) in a.iter() {
        // `{:?}` prints the shortest representation that round-trips an f32.
        writeln!(w, "{} {} {:?}", i + 1, j + 1, v)?;
    }
    Ok(())
}

pub fn load_matrix_market(path: &std::path::Path) -> Result<CsrMatrix> {
    let f = std::fs::File::open(path)?;
    read_matrix_market(std::io::BufReader::new(f))
}

pub fn save_matrix_market(a: &CsrMatrix, path: &std::path::Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_matrix_market(a, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_exact() {
        let a = CsrMatrix::from_triplets(
            3,
            4,
            &[(0, 3, 0.1), (2, 0, 1.0e-7), (2, 2, 0.333_333_34), (1, 1, 7.5)],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        let back = read_matrix_market(buf.as_slice()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn pattern_and_symmetric() {
        let src = "%%MatrixMarket matrix coordinate pattern symmetric\n% c\n3 3 2\n2 1\n3 3\n";
        let a = read_matrix_market(src.as_bytes()).unwrap();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 0), 1.0);
        assert_eq!(a.get(2, 2), 1.0);
    }

    #[test]
    fn errors() {
        assert!(read_matrix_market("".as_bytes()).is_err());
        assert!(read_matrix_market("%%MatrixMarket matrix array real general\n".as_bytes()).is_err());
        let bad = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        assert!(read_matrix_market(bad.as_bytes()).is_err());
        let short = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n";
        assert!(read_matrix_market(short.as_bytes()).is_err());
    }
}
