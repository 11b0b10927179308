//! Plain-text matrix files.
//!
//! ```text
//! # rows=3 cols=2
//! 1.0000000000000000e0,2.0000000000000000e0
//! ...
//! ```
//!
//! Values are written with 17 significant digits, which round-trips every
//! finite `f64`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn parse_err(path: &Path, line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        col,
        msg: msg.into(),
    }
}

fn parse_header(path: &Path, header: &str) -> Result<(usize, usize)> {
    let bad = || parse_err(path, 1, 1, format!("expected `# rows=<n> cols=<r>`, found `{header}`"));
    let rest = header.trim().strip_prefix('#').ok_or_else(bad)?;
    let mut rows = None;
    let mut cols = None;
    for field in rest.split_whitespace() {
        let (key, value) = field.split_once('=').ok_or_else(bad)?;
        let value: usize = value.parse().map_err(|_| bad())?;
        match key {
            "rows" => rows = Some(value),
            "cols" => cols = Some(value),
            _ => return Err(bad()),
        }
    }
    match (rows, cols) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(bad()),
    }
}

/// Parses matrix text. `path` is only used in error messages.
///
/// Error locations are 1-based: `line` is the file line and `col` the
/// comma-separated field.
pub fn parse_matrix(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, 1, "empty matrix file"))?;
    let (rows, cols) = parse_header(path, header)?;
    if rows == 0 || cols == 0 {
        return Err(parse_err(path, 1, 1, "matrix dimensions must be positive"));
    }

    let mut m = DMatrix::zeros(rows, cols);
    let mut row = 0;
    for (lineno, line) in lines {
        let lineno = lineno + 1;
        if row == rows {
            return Err(parse_err(path, lineno, 1, format!("more than {rows} data rows")));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(parse_err(
                path,
                lineno,
                fields.len().min(cols) + 1,
                format!("row {} has {} values, expected {cols}", row + 1, fields.len()),
            ));
        }
        for (col, tok) in fields.iter().enumerate() {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| parse_err(path, lineno, col + 1, format!("non-numeric token `{}`", tok.trim())))?;
            if !v.is_finite() {
                return Err(parse_err(path, lineno, col + 1, format!("non-finite value `{}`", tok.trim())));
            }
            m[(row, col)] = v;
        }
        row += 1;
    }
    if row != rows {
        return Err(parse_err(
            path,
            text.lines().count().max(1),
            1,
            format!("expected {rows} data rows, found {row}"),
        ));
    }
    Ok(m)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_matrix(&text, path)
}

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("# rows={} cols={}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{:.16e}", m[(i, j)]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_matrix(m)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("m.txt")
    }

    #[test]
    fn minimal_matrix() {
        let m = parse_matrix("# rows=1 cols=1\n5.0\n", p()).unwrap();
        assert_eq!(m.shape(), (1, 1));
        assert_eq!(m[(0, 0)], 5.0);
    }

    #[test]
    fn ragged_row_names_the_row() {
        let err = parse_matrix("# rows=2 cols=2\n1,2\n3\n", p()).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{msg}");
        assert!(msg.contains("row 2"), "{msg}");
    }

    #[test]
    fn bad_token_and_header() {
        let err = parse_matrix("# rows=1 cols=2\n1,abc\n", p()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, col: 2, .. }), "{err}");
        assert!(parse_matrix("rows=1 cols=1\n1\n", p()).is_err());
        assert!(parse_matrix("# rows=1\n1\n", p()).is_err());
        assert!(parse_matrix("# rows=2 cols=1\n1\n", p()).is_err());
        assert!(parse_matrix("# rows=1 cols=1\n1\n2\n", p()).is_err());
        assert!(parse_matrix("# rows=1 cols=1\nNaN\n", p()).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile_dir();
        let path = dir.join("m.txt");
        let m = DMatrix::from_row_slice(3, 2, &[0.1, -2.5e-300, 1.0 / 3.0, 7.0, f64::MAX, -0.0]);
        write_matrix(&path, &m).unwrap();
        let back = read_matrix(&path).unwrap();
        assert_eq!(m, back);
        std::fs::remove_dir_all(dir).ok();
    }

    fn tempfile_dir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("sensel-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    proptest! {
        #[test]
        fn text_round_trip(rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = DMatrix::from_fn(rows, cols, |_, _| {
                let bits: u64 = rng.random();
                let v = f64::from_bits(bits);
                if v.is_finite() { v } else { 1.0 }
            });
            let back = parse_matrix(&format_matrix(&m), p()).unwrap();
            prop_assert!(m.iter().zip(back.iter()).all(|(a, b)| a.to_bits() == b.to_bits() || (*a == 0.0 && *b == 0.0)));
        }
    }
}
