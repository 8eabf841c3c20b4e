//! LIBSVM text format: `<label> <index>:<value> ...` with 1-based indices.

use std::io::{BufRead, Write};

use super::data::{Dataset, Row};
use crate::error::{Error, Result};

/// Parses LIBSVM text. Blank lines and `#` comment suffixes are ignored.
/// `feature_dim` overrides the inferred dimension (the largest index seen).
pub fn parse_libsvm<R: BufRead>(reader: R, feature_dim: Option<usize>) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(format!("invalid label `{label_tok}`")))?;

        let mut indices = Vec::new();
        let mut values = Vec::new();
        for tok in tokens {
            let (i_str, v_str) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected `index:value`, got `{tok}`")))?;
            let index: usize = i_str
                .parse()
                .map_err(|_| err(format!("invalid index `{i_str}`")))?;
            if index < 1 {
                return Err(err("indices are 1-based; got 0".into()));
            }
            let value: f64 = v_str
                .parse()
                .map_err(|_| err(format!("invalid value `{v_str}`")))?;
            let zero_based = index - 1;
            if indices.last().is_some_and(|&prev| zero_based <= prev) {
                return Err(err(format!("index {index} is not increasing")));
            }
            max_index = max_index.max(index);
            indices.push(zero_based);
            values.push(value);
        }
        rows.push(Row::Sparse { indices, values });
        labels.push(label);
    }

    let dim = match feature_dim {
        Some(d) if d < max_index => {
            return Err(Error::Input(format!(
                "feature_dim override {d} is smaller than the largest index {max_index}"
            )))
        }
        Some(d) => d,
        None => max_index,
    };
    Dataset::new(rows, labels, dim)
}

/// Writes a dataset in LIBSVM format. Dense rows emit their nonzero entries.
pub fn write_libsvm<W: Write>(dataset: &Dataset, mut out: W) -> std::io::Result<()> {
    for (row, label) in dataset.rows().iter().zip(dataset.labels()) {
        write!(out, "{label}")?;
        let dense = matches!(row, Row::Dense(_));
        let mut res = Ok(());
        row.for_each_entry(|j, v| {
            if res.is_ok() && !(dense && v == 0.0) {
                res = write!(out, " {}:{}", j + 1, v);
            }
        });
        res?;
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset> {
        parse_libsvm(s.as_bytes(), None)
    }

    #[test]
    fn parses_sparse_line_with_zero_based_indices() {
        let ds = parse("+1 1:0.5 3:-2\n").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.label(0), 1.0);
        assert_eq!(
            ds.row(0),
            &Row::Sparse {
                indices: vec![0, 2],
                values: vec![0.5, -2.0]
            }
        );
        assert_eq!(ds.feature_dim(), 3);
    }

    #[test]
    fn empty_input_gives_empty_dataset() {
        let ds = parse("").unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.feature_dim(), 0);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let ds = parse("# header\n\n-1 2:1 # trailing\n  \n+1 1:3\n").unwrap();
        assert_eq!(ds.labels(), &[-1.0, 1.0]);
        assert_eq!(ds.feature_dim(), 2);
    }

    #[test]
    fn non_increasing_index_reports_line() {
        let e = parse("+1 1:1\n-1 2:1 1:1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e:?}");
        let e = parse("-1 2:1 2:3\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn malformed_tokens_are_rejected() {
        assert!(matches!(
            parse("abc 1:1"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(parse("1 0:1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("1 1:x"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("1\n1 1"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn feature_dim_override() {
        let ds = parse_libsvm("1 2:1\n".as_bytes(), Some(5)).unwrap();
        assert_eq!(ds.feature_dim(), 5);
        assert!(parse_libsvm("1 7:1\n".as_bytes(), Some(5)).is_err());
    }

    #[test]
    fn dense_rows_write_nonzeros() {
        let ds = Dataset::from_dense(vec![vec![0.0, 2.5, 0.0]], vec![-1.0]).unwrap();
        let mut buf = Vec::new();
        write_libsvm(&ds, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "-1 2:2.5\n");
    }
}
