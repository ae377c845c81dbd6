//! Dataset loading (CSV with a `label` column, LIBSVM sparse text) and
//! dataset/label writers.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use robust_knn::Dataset;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Libsvm,
}

impl FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DataFormat::Csv),
            "libsvm" | "svmlight" => Ok(DataFormat::Libsvm),
            other => Err(format!("unknown format `{other}` (expected csv or libsvm)")),
        }
    }
}

/// Dense dataset with the file's original integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub dim: usize,
    pub features: Vec<f64>,
    pub labels: Vec<i64>,
    pub feature_names: Vec<String>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Distinct labels in ascending order.
    pub fn classes(&self) -> Vec<i64> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }
}

fn default_names(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

fn parse_label(s: &str, line: u64) -> Result<i64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15 => Ok(v as i64),
        _ => Err(HarnessError::parse(
            line,
            format!("label `{s}` is not an integer"),
        )),
    }
}

fn parse_value(s: &str, line: u64) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| HarnessError::parse(line, format!("`{}` is not a number", s.trim())))?;
    if !v.is_finite() {
        return Err(HarnessError::parse(
            line,
            format!("non-finite value `{}`", s.trim()),
        ));
    }
    Ok(v)
}

/// CSV with a header row; the column named `label` holds the class.
pub fn parse_csv(text: &str) -> Result<RawDataset> {
    if text.trim().is_empty() {
        return Err(HarnessError::parse(1, "empty input"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let label_col = headers
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| HarnessError::parse(1, "header has no `label` column"))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_col)
        .map(|(_, h)| h.to_string())
        .collect();
    let dim = feature_names.len();
    if dim == 0 {
        return Err(HarnessError::parse(1, "no feature columns"));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != dim + 1 {
            return Err(HarnessError::InconsistentDimension {
                line,
                expected: dim,
                got: record.len().saturating_sub(1),
            });
        }
        for (i, field) in record.iter().enumerate() {
            if i == label_col {
                labels.push(parse_label(field, line)?);
            } else {
                features.push(parse_value(field, line)?);
            }
        }
    }
    if labels.is_empty() {
        return Err(HarnessError::parse(2, "no examples after header"));
    }
    Ok(RawDataset {
        dim,
        features,
        labels,
        feature_names,
    })
}

/// LIBSVM text: `label idx:val ...` with 1-based indices; missing entries are 0.
pub fn parse_libsvm(text: &str) -> Result<RawDataset> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0;
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = parse_label(tokens.next().unwrap_or(""), line_no)?;
        let mut row = Vec::new();
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| {
                HarnessError::parse(line_no, format!("expected idx:value, got `{tok}`"))
            })?;
            let idx: usize = idx
                .parse()
                .map_err(|_| HarnessError::parse(line_no, format!("bad feature index `{idx}`")))?;
            if idx == 0 {
                return Err(HarnessError::parse(line_no, "feature indices are 1-based"));
            }
            if row.iter().any(|&(j, _)| j == idx) {
                return Err(HarnessError::parse(
                    line_no,
                    format!("duplicate feature index {idx}"),
                ));
            }
            row.push((idx, parse_value(val, line_no)?));
            dim = dim.max(idx);
        }
        rows.push(row);
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(HarnessError::parse(1, "empty input"));
    }
    let dim = dim.max(1);
    let mut features = vec![0.0; rows.len() * dim];
    for (r, row) in rows.iter().enumerate() {
        for &(idx, val) in row {
            features[r * dim + idx - 1] = val;
        }
    }
    Ok(RawDataset {
        dim,
        features,
        labels,
        feature_names: default_names(dim),
    })
}

pub fn load_dataset(path: &Path, format: DataFormat) -> Result<RawDataset> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match format {
        DataFormat::Csv => parse_csv(&text),
        DataFormat::Libsvm => parse_libsvm(&text),
    }
}

/// Writes a binary dataset as CSV (features then `label`, plus extra label columns).
pub fn write_dataset_csv<W: Write>(
    out: W,
    data: &Dataset,
    names: &[String],
    extra: &[(&str, Vec<u8>)],
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let names = if names.len() == data.dim() {
        names.to_vec()
    } else {
        default_names(data.dim())
    };
    let mut header: Vec<String> = names;
    header.push("label".into());
    header.extend(extra.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.point(i).iter().map(|v| format!("{v}")).collect();
        rec.push(data.label(i).as_u8().to_string());
        rec.extend(extra.iter().map(|(_, col)| col[i].to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| HarnessError::Io {
        path: "<output>".into(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_basic() {
        let d = parse_csv("x1,x2,label\n0.1,0.2,1\n0.3,0.4,0\n").unwrap();
        assert_eq!(d.dim, 2);
        assert_eq!(d.len(), 2);
        assert_eq!(d.point(1), &[0.3, 0.4]);
        assert_eq!(d.labels, vec![1, 0]);
        assert_eq!(d.feature_names, vec!["x1", "x2"]);
    }

    #[test]
    fn csv_label_column_anywhere() {
        let d = parse_csv("label,a,b\n3,1,2\n-1,4,5\n").unwrap();
        assert_eq!(d.labels, vec![3, -1]);
        assert_eq!(d.point(0), &[1.0, 2.0]);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(
            parse_csv(""),
            Err(HarnessError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_csv("a,b\n1,2\n"),
            Err(HarnessError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_csv("a,label\n1,0\n1,2,3\n"),
            Err(HarnessError::InconsistentDimension {
                line: 3,
                expected: 1,
                got: 2
            })
        ));
        assert!(matches!(
            parse_csv("a,label\n1,0\nfoo,1\n"),
            Err(HarnessError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_csv("a,label\n1,0.5\n"),
            Err(HarnessError::Parse { line: 2, .. })
        ));
        assert!(parse_csv("a,label\n").is_err());
    }

    #[test]
    fn csv_integral_float_labels() {
        assert_eq!(
            parse_csv("a,label\n1,1.0\n2,+1\n").unwrap().labels,
            vec![1, 1]
        );
    }

    #[test]
    fn libsvm_dense_expansion() {
        let d = parse_libsvm("1 1:0.5 3:0.2\n").unwrap();
        assert_eq!(d.dim, 3);
        assert_eq!(d.point(0), &[0.5, 0.0, 0.2]);
        assert_eq!(d.labels, vec![1]);
    }

    #[test]
    fn libsvm_varied_rows() {
        let d = parse_libsvm("+1 2:1\n\n-1 1:3 # comment\n2 4:-1\n").unwrap();
        assert_eq!(d.dim, 4);
        assert_eq!(d.labels, vec![1, -1, 2]);
        assert_eq!(d.point(1), &[3.0, 0.0, 0.0, 0.0]);
        assert_eq!(d.point(2), &[0.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn libsvm_errors() {
        assert!(matches!(parse_libsvm(""), Err(HarnessError::Parse { .. })));
        assert!(matches!(
            parse_libsvm("1 0:1\n"),
            Err(HarnessError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_libsvm("1 1:1\n1 2-3\n"),
            Err(HarnessError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_libsvm("x 1:1\n"),
            Err(HarnessError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_libsvm("1 1:1 1:2\n"),
            Err(HarnessError::Parse { line: 1, .. })
        ));
    }
}
