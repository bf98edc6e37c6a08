use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::objectives::QueryGroups;

/// C `printf("%.17g")` formatting, which round-trips every `f64`.
pub fn format_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let fixed = format!("{v:.prec$}", prec = (16 - exp) as usize);
        strip_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip_zeros(mantissa), exp.abs())
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses a ranking file with lines `<grade> qid:<q> <idx>:<val> ...`.
pub fn load_svmlight_qid(path: impl AsRef<Path>) -> Result<Dataset> {
    load_svmlight_qid_with_dim(path, None)
}

/// As [`load_svmlight_qid`], with the feature count fixed instead of taken
/// from the largest index seen.
pub fn load_svmlight_qid_with_dim(path: impl AsRef<Path>, dim: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut keys: Vec<String> = Vec::new();
    let mut closed: HashSet<String> = HashSet::new();
    let mut max_idx = 0usize;

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut tokens = body.split_whitespace();
        let grade_tok = tokens.next().unwrap_or_default();
        let grade: f64 = grade_tok
            .parse()
            .ok()
            .filter(|g: &f64| g.is_finite())
            .ok_or_else(|| parse_err(line_no, format!("invalid grade {grade_tok:?}")))?;
        let qid = tokens
            .next()
            .and_then(|t| t.strip_prefix("qid:"))
            .filter(|q| !q.is_empty())
            .ok_or_else(|| parse_err(line_no, "expected qid:<id> after the grade"))?
            .to_string();

        if let Some(last) = keys.last() {
            if *last != qid {
                if closed.contains(&qid) {
                    return Err(Error::QueryInterleaved { line: line_no, qid });
                }
                closed.insert(last.clone());
            }
        }

        let mut feats = Vec::new();
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(line_no, format!("expected <index>:<value>, got {tok:?}")))?;
            let idx: usize = i
                .parse()
                .ok()
                .filter(|&i| i >= 1)
                .ok_or_else(|| parse_err(line_no, format!("invalid feature index {i:?}")))?;
            let val: f64 = v
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_err(line_no, format!("invalid feature value {v:?}")))?;
            max_idx = max_idx.max(idx);
            feats.push((idx - 1, val));
        }
        rows.push(feats);
        labels.push(grade);
        keys.push(qid);
    }

    let d = match dim {
        Some(d) if d < max_idx => {
            return Err(Error::InvalidConfig(format!(
                "feature index {max_idx} exceeds the configured dimension {d}"
            )))
        }
        Some(d) => d,
        None => max_idx,
    };
    let mut features = DenseMatrix::zeros(rows.len(), d);
    for (i, feats) in rows.iter().enumerate() {
        let row = features.row_mut(i);
        for &(j, v) in feats {
            row[j] = v;
        }
    }
    let groups = if keys.is_empty() {
        None
    } else {
        Some(QueryGroups::from_keys(&keys)?)
    };
    let name = path
        .file_name()
        .map_or_else(|| "svmlight".into(), |s| s.to_string_lossy().into_owned());
    Dataset::new(name, features, labels.into(), groups)
}

/// Writes a grouped dataset in SVMLight-qid form with qids `1..=q`.
///
/// Zero features are omitted except the last column, which is always
/// written so that reloading recovers the dimension.
pub fn write_svmlight_qid(ds: &Dataset, mut out: impl Write) -> Result<()> {
    let groups = ds
        .groups()
        .ok_or_else(|| Error::InvalidGroups("dataset has no query groups".into()))?;
    let d = ds.dim();
    for (q, range) in groups.iter().enumerate() {
        for i in range {
            let mut line = format!("{} qid:{}", format_g17(ds.labels()[i]), q + 1);
            for (j, &v) in ds.features().row(i).iter().enumerate() {
                if v != 0.0 || j + 1 == d {
                    line.push_str(&format!(" {}:{}", j + 1, format_g17(v)));
                }
            }
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<Dataset> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        load_svmlight_qid(f.path())
    }

    #[test]
    fn single_line() {
        let ds = parse("2 qid:1 1:0.5 3:1.0\n").unwrap();
        assert_eq!(ds.features().row(0), &[0.5, 0.0, 1.0]);
        assert_eq!(ds.labels()[0], 2.0);
        assert_eq!(ds.groups().unwrap().sizes(), vec![1]);
    }

    #[test]
    fn groups_and_comments() {
        let text = "# header\n1 qid:7 1:1\n0 qid:7 2:1 # doc b\n\n3 qid:9 1:2\n0 qid:9 1:3\n1 qid:9 2:4\n";
        let ds = parse(text).unwrap();
        assert_eq!(ds.groups().unwrap().sizes(), vec![2, 3]);
        assert_eq!(ds.dim(), 2);
    }

    #[test]
    fn errors() {
        match parse("abc qid:1 1:0.5\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("1 1:0.5\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("1 qid:1 0:0.5\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse("1 qid:1 1:x\n"), Err(Error::Parse { .. })));
        assert!(matches!(
            parse("1 qid:1 1:1\n1 qid:2 1:1\n1 qid:1 1:1\n"),
            Err(Error::QueryInterleaved { line: 3, .. })
        ));
    }

    #[test]
    fn g17_matches_printf() {
        let cases = [
            (0.1, "0.10000000000000001"),
            (1.0, "1"),
            (2.5, "2.5"),
            (-3.0, "-3"),
            (1e20, "1e+20"),
            (1.5e-5, "1.5e-05"),
            (1.0 / 3.0, "0.33333333333333331"),
            (-2.0e-7, "-1.9999999999999999e-07"),
            (123456.0, "123456"),
            (0.0001, "0.0001"),
            (1e16, "10000000000000000"),
            (1e17, "1e+17"),
        ];
        for (v, want) in cases {
            assert_eq!(format_g17(v), want, "value {v}");
        }
    }

    proptest! {
        #[test]
        fn g17_round_trips(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
            prop_assert_eq!(format_g17(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }

        #[test]
        fn write_then_load_is_identity(
            sizes in prop::collection::vec(1usize..4, 1..5),
            seed_vals in prop::collection::vec(-1e3f64..1e3, 64),
        ) {
            let n: usize = sizes.iter().sum();
            let d = 3;
            let data: Vec<f64> = (0..n * d)
                .map(|k| if k % 4 == 1 { 0.0 } else { seed_vals[k % 64] / 7.0 })
                .collect();
            let labels: Vec<f64> = (0..n).map(|i| (i % 5) as f64).collect();
            let ds = Dataset::new(
                "p",
                DenseMatrix::from_vec(n, d, data).unwrap(),
                labels.into(),
                Some(QueryGroups::from_sizes(&sizes).unwrap()),
            ).unwrap();
            let mut buf = Vec::new();
            write_svmlight_qid(&ds, &mut buf).unwrap();
            let text = String::from_utf8(buf).unwrap();
            let back = parse(&text).unwrap();
            prop_assert_eq!(back.features(), ds.features());
            prop_assert_eq!(back.labels(), ds.labels());
            prop_assert_eq!(back.groups(), ds.groups());
        }
    }
}
