//! LIBSVM / SVMlight sparse text format: `<label> <idx>:<val> ...` with 1-based indices.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::SparseDataset;
use crate::error::{Error, Result};

/// Parses LIBSVM text. The feature dimension is the largest index seen unless
/// `dim` is given, in which case it must cover every index.
pub fn parse_libsvm<R: BufRead>(reader: R, dim: Option<usize>) -> Result<SparseDataset> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        labels.push(
            parse_label(label_tok)
                .ok_or_else(|| Error::Parse { line: lineno, msg: format!("invalid label {label_tok:?}") })?,
        );
        let mut row = Vec::new();
        for tok in tokens {
            let (j, v) = parse_pair(tok)
                .ok_or_else(|| Error::Parse { line: lineno, msg: format!("malformed feature token {tok:?}") })?;
            if let Some(&(prev, _)) = row.last() {
                if j <= prev {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("feature indices must be strictly increasing ({} after {})", j + 1, prev + 1),
                    });
                }
            }
            max_index = max_index.max(j + 1);
            row.push((j, v));
        }
        rows.push(row);
    }
    let d = match dim {
        Some(d) if d < max_index => {
            return Err(Error::Config(format!("declared dimension {d} is smaller than max feature index {max_index}")))
        }
        Some(d) => d,
        None => max_index,
    };
    let mut ds = SparseDataset::new(d);
    for (label, row) in labels.into_iter().zip(&rows) {
        ds.push_row(label, row);
    }
    Ok(ds)
}

pub fn read_libsvm_file(path: impl AsRef<Path>, dim: Option<usize>) -> Result<SparseDataset> {
    parse_libsvm(BufReader::new(File::open(path)?), dim)
}

/// Writes `ds` in LIBSVM format. Values use the shortest round-trip representation.
pub fn write_libsvm<W: Write>(ds: &SparseDataset, mut w: W) -> Result<()> {
    for i in 0..ds.len() {
        let label = ds.label(i);
        if label > 0 {
            write!(w, "+{label}")?;
        } else {
            write!(w, "{label}")?;
        }
        let (ix, v) = ds.row(i);
        for (j, a) in ix.iter().zip(v) {
            write!(w, " {}:{}", j + 1, a)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn parse_label(tok: &str) -> Option<i32> {
    if let Ok(v) = tok.parse::<i32>() {
        return Some(v);
    }
    // "1.0" style labels appear in some exports
    let v = tok.parse::<f64>().ok()?;
    (v.fract() == 0.0 && v.abs() <= i32::MAX as f64).then_some(v as i32)
}

fn parse_pair(tok: &str) -> Option<(usize, f64)> {
    let (idx, val) = tok.split_once(':')?;
    let idx: usize = idx.parse().ok()?;
    let val: f64 = val.parse().ok()?;
    (idx >= 1 && val.is_finite()).then(|| (idx - 1, val))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<SparseDataset> {
        parse_libsvm(s.as_bytes(), None)
    }

    #[test]
    fn parses_basic_line() {
        let ds = parse("+1 1:0.5 3:-1.2").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.label(0), 1);
        assert_eq!(ds.row(0), (&[0usize, 2][..], &[0.5, -1.2][..]));
        assert_eq!(ds.dim(), 3);
    }

    #[test]
    fn label_only_line_is_empty_row() {
        let ds = parse("-1").unwrap();
        assert_eq!(ds.label(0), -1);
        assert!(ds.row(0).0.is_empty());
    }

    #[test]
    fn bad_value_reports_line() {
        match parse("1 2:abc") {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("expected parse error at line 1, got {other:?}"),
        }
        match parse("1 1:1\n\n-1 3:1 2:1") {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("expected parse error at line 3, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_labels_and_tokens() {
        assert!(parse("abc 1:1").is_err());
        assert!(parse("1 0:1").is_err());
        assert!(parse("1 1-1").is_err());
        assert!(parse("1.5 1:1").is_err());
        assert_eq!(parse("2.0 1:1").unwrap().label(0), 2);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let ds = parse("# header\n\n+1 2:1 # trailing\n-1 1:2\n").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 2);
    }

    #[test]
    fn declared_dimension_pads_or_rejects() {
        assert_eq!(parse_libsvm("1 2:1".as_bytes(), Some(10)).unwrap().dim(), 10);
        assert!(parse_libsvm("1 20:1".as_bytes(), Some(10)).is_err());
    }

    mod roundtrip {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn write_then_parse_is_identity(rows in proptest::collection::vec(
                (prop_oneof![Just(-1i32), Just(1i32), 0i32..10],
                 proptest::collection::btree_map(0usize..50, -1e6f64..1e6, 0..8)),
                1..20))
            {
                let mut ds = SparseDataset::new(50);
                for (label, feats) in &rows {
                    let row: Vec<(usize, f64)> = feats.iter().map(|(&j, &v)| (j, v)).collect();
                    ds.push_row(*label, &row);
                }
                let mut buf = Vec::new();
                write_libsvm(&ds, &mut buf).unwrap();
                let back = parse_libsvm(&buf[..], Some(50)).unwrap();
                prop_assert_eq!(back, ds);
            }
        }
    }
}
