//! Feature CSV files.
//!
//! Header row `f0,f1,...,f{d-1}` with an optional integer `label` column
//! (1-based class index). Labels are 0-based in memory.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use openset_core::data::SampleSet;

use crate::error::{Error, Result};

/// Whether a file must, may or must not carry a `label` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelColumn {
    Required,
    Optional,
    Forbidden,
}

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("bad header: {0}")]
    Header(String),
    #[error("missing required label column")]
    MissingLabel,
    #[error("unexpected label column")]
    UnexpectedLabel,
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged { line: u64, expected: usize, found: usize },
    #[error("line {line}: column {column}: {value:?} is not a number")]
    NonNumeric { line: u64, column: String, value: String },
    #[error("line {line}: {value:?} is not a 1-based class label")]
    BadLabel { line: u64, value: String },
    #[error("expected {expected} feature columns, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("no data rows")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

struct Layout {
    features: Vec<usize>,
    label: Option<usize>,
    width: usize,
}

fn parse_header(header: &csv::StringRecord, labels: LabelColumn) -> Result<Layout, ParseError> {
    let mut features = Vec::new();
    let mut label = None;
    for (i, name) in header.iter().enumerate() {
        let name = name.trim();
        if name == "label" {
            if label.replace(i).is_some() {
                return Err(ParseError::Header("duplicate label column".into()));
            }
        } else if name == format!("f{}", features.len()) {
            features.push(i);
        } else {
            return Err(ParseError::Header(format!(
                "column {} is {name:?}, expected \"f{}\" or \"label\"",
                i + 1,
                features.len()
            )));
        }
    }
    if features.is_empty() {
        return Err(ParseError::Header("no feature columns".into()));
    }
    match (labels, label) {
        (LabelColumn::Required, None) => return Err(ParseError::MissingLabel),
        (LabelColumn::Forbidden, Some(_)) => return Err(ParseError::UnexpectedLabel),
        _ => {}
    }
    Ok(Layout {
        features,
        label,
        width: header.len(),
    })
}

/// Parses CSV text. `dim`, when given, must match the number of feature columns.
pub fn parse_samples(input: impl Read, dim: Option<usize>, labels: LabelColumn) -> Result<SampleSet, ParseError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let layout = parse_header(reader.headers()?, labels)?;
    let d = layout.features.len();
    if let Some(expected) = dim {
        if expected != d {
            return Err(ParseError::Dimension { expected, found: d });
        }
    }
    let mut features = Vec::new();
    let mut ys = layout.label.map(|_| Vec::new());
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, csv::Position::line);
        if record.len() != layout.width {
            return Err(ParseError::Ragged {
                line,
                expected: layout.width,
                found: record.len(),
            });
        }
        for (k, &col) in layout.features.iter().enumerate() {
            let cell = record[col].trim();
            let value: f64 = cell.parse().map_err(|_| ParseError::NonNumeric {
                line,
                column: format!("f{k}"),
                value: cell.to_string(),
            })?;
            features.push(value);
        }
        if let (Some(col), Some(ys)) = (layout.label, ys.as_mut()) {
            let cell = record[col].trim();
            match cell.parse::<usize>() {
                Ok(y) if y >= 1 => ys.push(y - 1),
                _ => {
                    return Err(ParseError::BadLabel {
                        line,
                        value: cell.to_string(),
                    })
                }
            }
        }
    }
    if features.is_empty() {
        return Err(ParseError::Empty);
    }
    SampleSet::new(d, features, ys).map_err(|e| ParseError::Header(e.to_string()))
}

pub fn read_samples(path: &Path, dim: Option<usize>, labels: LabelColumn) -> Result<SampleSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_samples(file, dim, labels).map_err(|source| match source {
        ParseError::Csv(e) if e.is_io_error() => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        },
        source => Error::Parse {
            path: path.to_path_buf(),
            source,
        },
    })
}

/// Writes `set` with a `label` column when it carries labels. Values use
/// the shortest representation that parses back to the same `f64`.
pub fn write_samples_to(out: impl Write, set: &SampleSet) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..set.dim()).map(|k| format!("f{k}")).collect();
    if set.labels().is_some() {
        header.push("label".into());
    }
    writer.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..set.len() {
        row.clear();
        row.extend(set.row(i).iter().map(f64::to_string));
        if let Some(y) = set.label(i) {
            row.push((y + 1).to_string());
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_samples(path: &Path, set: &SampleSet) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_samples_to(file, set).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_row_file() {
        let text = "f0,f1,label\n0.5,-1,1\n2e-3,4,3\n";
        let set = parse_samples(text.as_bytes(), Some(2), LabelColumn::Required).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.row(0), &[0.5, -1.0]);
        assert_eq!(set.row(1), &[0.002, 4.0]);
        assert_eq!(set.labels().unwrap(), &[0, 2]);
    }

    #[test]
    fn non_numeric_cell_cites_its_line() {
        let text = "f0,f1\n1,2\nx,3\n";
        let err = parse_samples(text.as_bytes(), None, LabelColumn::Optional).unwrap_err();
        assert!(matches!(err, ParseError::NonNumeric { line: 3, ref column, .. } if column == "f0"), "{err}");
    }

    #[test]
    fn distinct_errors() {
        let ragged = parse_samples("f0,f1\n1,2\n1\n".as_bytes(), None, LabelColumn::Optional).unwrap_err();
        assert!(matches!(ragged, ParseError::Ragged { line: 3, expected: 2, found: 1 }));
        let missing = parse_samples("f0,f1\n1,2\n".as_bytes(), None, LabelColumn::Required).unwrap_err();
        assert!(matches!(missing, ParseError::MissingLabel));
        let unexpected = parse_samples("f0,label\n1,2\n".as_bytes(), None, LabelColumn::Forbidden).unwrap_err();
        assert!(matches!(unexpected, ParseError::UnexpectedLabel));
        let zero = parse_samples("f0,label\n1,0\n".as_bytes(), None, LabelColumn::Required).unwrap_err();
        assert!(matches!(zero, ParseError::BadLabel { line: 2, .. }));
        let header = parse_samples("f1,f0\n1,2\n".as_bytes(), None, LabelColumn::Optional).unwrap_err();
        assert!(matches!(header, ParseError::Header(_)));
        let dim = parse_samples("f0\n1\n".as_bytes(), Some(2), LabelColumn::Optional).unwrap_err();
        assert!(matches!(dim, ParseError::Dimension { expected: 2, found: 1 }));
        let empty = parse_samples("f0\n".as_bytes(), None, LabelColumn::Optional).unwrap_err();
        assert!(matches!(empty, ParseError::Empty));
    }
}
