//! Matrix Market coordinate files for real symmetric matrices.

use std::io::{BufRead, Write};

use hsdc_core::{BandedMatrix, Error, Result};

pub const HEADER: &str = "%%MatrixMarket matrix coordinate real symmetric";

/// Writes the lower triangle, 1-indexed, column by column. Values use the
/// shortest representation that reads back to the same bits.
pub fn write_banded<W: Write>(a: &BandedMatrix, comments: &[String], w: &mut W) -> Result<()> {
    let entries: Vec<(usize, usize, f64)> = a.lower_entries().filter(|&(i, j, x)| x != 0.0 || i == j).collect();
    writeln!(w, "{HEADER}")?;
    for c in comments {
        for line in c.lines() {
            writeln!(w, "% {line}")?;
        }
    }
    writeln!(w, "{} {} {}", a.n(), a.n(), entries.len())?;
    for (i, j, x) in entries {
        writeln!(w, "{} {} {:?}", i + 1, j + 1, x)?;
    }
    Ok(())
}

/// Reads a real (or integer / pattern) coordinate matrix that is either
/// declared symmetric or stored in full with symmetric entries.
pub fn read_banded<R: BufRead>(r: R) -> Result<BandedMatrix> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty file".into()))??;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::Format(format!("not a Matrix Market header: '{header}'")));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::Format(format!("unsupported storage '{}', expected coordinate", tokens[2])));
    }
    let pattern = match tokens[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" => true,
        other => return Err(Error::Format(format!("unsupported field '{other}'"))),
    };
    let symmetric = match tokens[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => return Err(Error::Format(format!("unsupported symmetry '{other}'"))),
    };
    let mut size = None;
    let mut entries = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let f: Vec<&str> = t.split_whitespace().collect();
        if size.is_none() {
            let p = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad size line '{t}'")));
            if f.len() != 3 {
                return Err(Error::Format(format!("bad size line '{t}'")));
            }
            let (rows, cols, nnz) = (p(f[0])?, p(f[1])?, p(f[2])?);
            if rows != cols {
                return Err(Error::Format(format!("{rows}x{cols} matrix is not square")));
            }
            size = Some((rows, nnz));
            entries.reserve(nnz);
            continue;
        }
        let want = if pattern { 2 } else { 3 };
        if f.len() < want {
            return Err(Error::Format(format!("bad entry line '{t}'")));
        }
        let idx = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad index in '{t}'")));
        let (i, j) = (idx(f[0])?, idx(f[1])?);
        let x = if pattern { 1.0 } else { f[2].parse::<f64>().map_err(|_| Error::Format(format!("bad value in '{t}'")))? };
        entries.push((i, j, x));
    }
    let (n, nnz) = size.ok_or_else(|| Error::Format("missing size line".into()))?;
    if entries.len() != nnz {
        return Err(Error::Format(format!("expected {nnz} entries, found {}", entries.len())));
    }
    let mut lower = std::collections::BTreeMap::new();
    let mut upper = std::collections::BTreeMap::new();
    for &(i, j, x) in &entries {
        if i == 0 || j == 0 || i > n || j > n {
            return Err(Error::Format(format!("entry ({i}, {j}) outside a {n}x{n} matrix")));
        }
        let (i, j) = (i - 1, j - 1);
        if symmetric && i < j {
            return Err(Error::Format(format!("symmetric file stores upper entry ({}, {})", i + 1, j + 1)));
        }
        let target = if i >= j { &mut lower } else { &mut upper };
        if target.insert(if i >= j { (i, j) } else { (j, i) }, x).is_some() {
            return Err(Error::Format(format!("duplicate entry ({}, {})", i + 1, j + 1)));
        }
    }
    if !symmetric {
        let scale = entries.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt();
        let tol = 8.0 * f64::EPSILON * scale;
        for (&(i, j), &x) in lower.iter().filter(|((i, j), _)| i != j) {
            let y = upper.get(&(i, j)).copied().unwrap_or(0.0);
            if (x - y).abs() > tol {
                return Err(Error::NonSymmetric { row: i, col: j, mismatch: (x - y).abs() });
            }
        }
        for (&(i, j), &y) in &upper {
            if !lower.contains_key(&(i, j)) && y.abs() > tol {
                return Err(Error::NonSymmetric { row: i, col: j, mismatch: y.abs() });
            }
        }
    }
    let b = lower.keys().map(|&(i, j)| i - j).max().unwrap_or(0);
    let mut a = BandedMatrix::zeros(n, b);
    for ((i, j), x) in lower {
        a.set(i, j, x);
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hsdc_core::matgen::{banded_from_spectrum, named_matrix, NamedMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let eigs: Vec<f64> = (0..40).map(|k| (k as f64).sin() / 3.0).collect();
        let a = banded_from_spectrum(&eigs, 3, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_banded(&a, &["seed 1".into()], &mut buf).unwrap();
        let b = read_banded(buf.as_slice()).unwrap();
        assert_eq!(a.n(), b.n());
        for j in 0..40 {
            for i in j..40 {
                assert_eq!(a.get(i, j).to_bits(), b.get(i, j).to_bits());
            }
        }
    }

    #[test]
    fn tridiagonal_entry_count() {
        let a = named_matrix(NamedMatrix::Toeplitz121, 64).unwrap();
        let mut buf = Vec::new();
        write_banded(&a, &[], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap() == "64 64 127");
        assert_eq!(text.lines().count(), 2 + 127);
    }

    #[test]
    fn general_storage_is_checked() {
        let ok = "%%MatrixMarket matrix coordinate real general\n2 2 4\n1 1 1\n2 1 3\n1 2 3\n2 2 5\n";
        let a = read_banded(ok.as_bytes()).unwrap();
        assert_eq!((a.get(1, 0), a.get(0, 1), a.bandwidth()), (3.0, 3.0, 1));
        let bad = "%%MatrixMarket matrix coordinate real general\n2 2 2\n2 1 3\n1 2 4\n";
        assert!(matches!(read_banded(bad.as_bytes()), Err(Error::NonSymmetric { .. })));
    }

    #[test]
    fn malformed_inputs() {
        for text in [
            "",
            "%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1\n",
            "%%MatrixMarket matrix coordinate complex symmetric\n2 2 1\n1 1 1 0\n",
        ] {
            assert!(matches!(read_banded(text.as_bytes()), Err(Error::Format(_))), "{text}");
        }
    }
}
