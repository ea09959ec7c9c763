//! Matrix text format: a `rows cols` header, then row-major whitespace
//! separated decimals. Values are written in shortest round-trip form.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub fn format_matrix(a: &Array2<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", a.nrows(), a.ncols());
    for row in a.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v:e}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<Array2<f64>> {
    let mut tokens = text.split_whitespace();
    let mut dim = |name: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::parse("matrix", format!("missing {name}")))?
            .parse()
            .map_err(|_| Error::parse("matrix", format!("bad {name}")))
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    let values = tokens
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::parse("matrix", format!("bad value {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != rows * cols {
        return Err(Error::parse(
            "matrix",
            format!("expected {} values, found {}", rows * cols, values.len()),
        ));
    }
    Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::parse("matrix", e.to_string()))
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text)
}

pub fn write_matrix(path: &Path, a: &Array2<f64>) -> Result<()> {
    std::fs::write(path, format_matrix(a)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn header_and_layout() {
        let a = array![[1.0, -2.5], [0.1, 3e-300]];
        let text = format_matrix(&a);
        assert!(text.starts_with("2 2\n"));
        assert_eq!(parse_matrix(&text).unwrap(), a);
    }

    #[test]
    fn rejects_wrong_count() {
        assert!(parse_matrix("2 2\n1 2 3").is_err());
        assert!(parse_matrix("1 1\nabc").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(vals in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..40)) {
            let n = vals.len();
            let a = Array2::from_shape_vec((1, n), vals).unwrap();
            let b = parse_matrix(&format_matrix(&a)).unwrap();
            prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
