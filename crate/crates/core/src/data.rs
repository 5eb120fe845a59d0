//! Dataset model, index bookkeeping and CSV/JSON exchange.
//!
//! A [`Dataset`] is column-major: one `Vec<Cell>` per feature, plus optional
//! binary labels and a per-row provenance flag. Missing values are a cell
//! state of their own ([`Cell::Missing`]), never a sentinel number.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum FeatureKind {
    Numeric,
    Binary,
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default)]
    pub units: String,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>, units: impl Into<String>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Numeric,
            units: units.into(),
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Binary,
            units: String::new(),
        }
    }

    pub fn categorical(name: impl Into<String>, levels: &[&str]) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Categorical {
                levels: levels.iter().map(|s| s.to_string()).collect(),
            },
            units: String::new(),
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, FeatureKind::Categorical { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Value(f64),
    /// Index into the feature's categorical level list.
    Level(usize),
    Missing,
}

impl Cell {
    pub fn value(self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_missing(self) -> bool {
        matches!(self, Cell::Missing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    Synthetic,
}

/// Dense row-major matrix of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix shape does not match data");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix::new(idx.len(), self.cols, data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    specs: Vec<FeatureSpec>,
    columns: Vec<Vec<Cell>>,
    labels: Option<Vec<u8>>,
    provenance: Vec<Provenance>,
    scaled: bool,
}

impl Dataset {
    /// Builds a dataset, checking every structural invariant.
    pub fn new(
        specs: Vec<FeatureSpec>,
        columns: Vec<Vec<Cell>>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        let n = columns
            .first()
            .map(Vec::len)
            .or_else(|| labels.as_ref().map(Vec::len))
            .unwrap_or(0);
        let provenance = vec![Provenance::Original; n];
        Dataset::with_provenance(specs, columns, labels, provenance)
    }

    pub fn with_provenance(
        specs: Vec<FeatureSpec>,
        columns: Vec<Vec<Cell>>,
        labels: Option<Vec<u8>>,
        provenance: Vec<Provenance>,
    ) -> Result<Self> {
        validate_specs(&specs)?;
        if specs.len() != columns.len() {
            return Err(Error::Schema(format!(
                "{} feature specs but {} columns",
                specs.len(),
                columns.len()
            )));
        }
        let n = provenance.len();
        for (spec, col) in specs.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::Schema(format!(
                    "column `{}` has {} rows, expected {n}",
                    spec.name,
                    col.len()
                )));
            }
            check_column_cells(spec, col)?;
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Schema(format!(
                    "label column has {} rows, expected {n}",
                    l.len()
                )));
            }
            if let Some(bad) = l.iter().find(|&&y| y > 1) {
                return Err(Error::Schema(format!("label value {bad} is not 0/1")));
            }
        }
        Ok(Dataset {
            specs,
            columns,
            labels,
            provenance,
            scaled: false,
        })
    }

    /// Wraps a numeric matrix; every column is declared numeric.
    pub fn from_matrix(names: &[String], m: &Matrix, labels: Option<Vec<u8>>) -> Result<Self> {
        let specs = names.iter().map(|n| FeatureSpec::numeric(n.clone(), "")).collect();
        Dataset::new(specs, matrix_columns(m), labels)
    }

    pub fn n_rows(&self) -> usize {
        self.provenance.len()
    }

    pub fn n_features(&self) -> usize {
        self.specs.len()
    }

    pub fn specs(&self) -> &[FeatureSpec] {
        &self.specs
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.name.clone()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    pub fn column(&self, j: usize) -> &[Cell] {
        &self.columns[j]
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[u8]> {
        self.labels.as_deref().ok_or(Error::Unlabeled)
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn synthetic_count(&self) -> usize {
        self.provenance
            .iter()
            .filter(|p| **p == Provenance::Synthetic)
            .count()
    }

    pub fn is_scaled(&self) -> bool {
        self.scaled
    }

    pub(crate) fn mark_scaled(mut self, scaled: bool) -> Self {
        self.scaled = scaled;
        self
    }

    /// True when no missing cells remain and every column is non-categorical.
    pub fn is_numeric(&self) -> bool {
        self.specs.iter().all(|s| !s.is_categorical())
            && self.columns.iter().flatten().all(|c| matches!(c, Cell::Value(_)))
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().flatten().any(|c| c.is_missing())
    }

    /// Row-major numeric view; fails on missing or categorical cells.
    pub fn to_matrix(&self) -> Result<Matrix> {
        let (n, p) = (self.n_rows(), self.n_features());
        let mut data = vec![0.0; n * p];
        for (j, col) in self.columns.iter().enumerate() {
            for (i, c) in col.iter().enumerate() {
                match c {
                    Cell::Value(v) => data[i * p + j] = *v,
                    _ => {
                        return Err(Error::NotNumeric(format!(
                            "row {i}, feature `{}`",
                            self.specs[j].name
                        )))
                    }
                }
            }
        }
        Ok(Matrix::new(n, p, data))
    }

    pub fn subset_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            specs: self.specs.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| idx.iter().map(|&i| c[i]).collect())
                .collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
            provenance: idx.iter().map(|&i| self.provenance[i]).collect(),
            scaled: self.scaled,
        }
    }

    /// Keeps the named features in the order given.
    pub fn select_features<S: AsRef<str>>(&self, names: &[S]) -> Result<Dataset> {
        let mut specs = Vec::with_capacity(names.len());
        let mut columns = Vec::with_capacity(names.len());
        for name in names {
            let j = self
                .feature_index(name.as_ref())
                .ok_or_else(|| Error::UnknownFeature(name.as_ref().to_string()))?;
            specs.push(self.specs[j].clone());
            columns.push(self.columns[j].clone());
        }
        validate_specs(&specs)?;
        Ok(Dataset {
            specs,
            columns,
            labels: self.labels.clone(),
            provenance: self.provenance.clone(),
            scaled: self.scaled,
        })
    }

    pub fn without_feature(&self, name: &str) -> Result<Dataset> {
        let keep: Vec<&str> = self
            .specs
            .iter()
            .map(|s| s.name.as_str())
            .filter(|n| *n != name)
            .collect();
        if keep.len() == self.n_features() {
            return Err(Error::UnknownFeature(name.to_string()));
        }
        self.select_features(&keep)
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Dataset> {
        if labels.len() != self.n_rows() {
            return Err(Error::Schema(format!(
                "label column has {} rows, expected {}",
                labels.len(),
                self.n_rows()
            )));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::Schema("labels must be 0/1".into()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Appends numeric rows (for instance SMOTE output) with the given provenance.
    pub(crate) fn append_numeric_rows(
        &mut self,
        rows: &Matrix,
        labels: &[u8],
        provenance: Provenance,
    ) {
        debug_assert_eq!(rows.cols(), self.n_features());
        for (j, col) in self.columns.iter_mut().enumerate() {
            col.extend((0..rows.rows()).map(|i| Cell::Value(rows.get(i, j))));
        }
        if let Some(l) = self.labels.as_mut() {
            l.extend_from_slice(labels);
        }
        self.provenance
            .extend(std::iter::repeat_n(provenance, rows.rows()));
    }

    pub(crate) fn into_parts(self) -> (Vec<FeatureSpec>, Vec<Vec<Cell>>, Option<Vec<u8>>, Vec<Provenance>) {
        (self.specs, self.columns, self.labels, self.provenance)
    }
}

pub(crate) fn matrix_columns(m: &Matrix) -> Vec<Vec<Cell>> {
    (0..m.cols())
        .map(|j| (0..m.rows()).map(|i| Cell::Value(m.get(i, j))).collect())
        .collect()
}

fn validate_specs(specs: &[FeatureSpec]) -> Result<()> {
    let mut seen = HashSet::new();
    for s in specs {
        if s.name == LABEL_COLUMN {
            return Err(Error::Schema("`label` is reserved for the outcome column".into()));
        }
        if !seen.insert(s.name.as_str()) {
            return Err(Error::Schema(format!("duplicate feature name `{}`", s.name)));
        }
        if let FeatureKind::Categorical { levels } = &s.kind {
            if levels.is_empty() {
                return Err(Error::Schema(format!("`{}` has no levels", s.name)));
            }
            let uniq: HashSet<_> = levels.iter().collect();
            if uniq.len() != levels.len() {
                return Err(Error::Schema(format!("`{}` has duplicate levels", s.name)));
            }
        }
    }
    Ok(())
}

fn check_column_cells(spec: &FeatureSpec, col: &[Cell]) -> Result<()> {
    for (row, c) in col.iter().enumerate() {
        let bad = match (&spec.kind, c) {
            (_, Cell::Missing) => None,
            (FeatureKind::Categorical { levels }, Cell::Level(l)) if *l < levels.len() => None,
            (FeatureKind::Categorical { .. }, _) => Some("expected a category level"),
            (_, Cell::Level(_)) => Some("level cell in a non-categorical column"),
            (_, Cell::Value(v)) if !v.is_finite() => Some("non-finite value"),
            (FeatureKind::Binary, Cell::Value(v)) if *v != 0.0 && *v != 1.0 => {
                Some("binary value must be 0 or 1")
            }
            _ => None,
        };
        if let Some(message) = bad {
            return Err(Error::Cell {
                row,
                column: spec.name.clone(),
                message: message.into(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    /// Checks disjointness, coverage of `0..n` and non-emptiness.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.train.is_empty() || self.test.is_empty() {
            return Err(Error::InvalidInput("train and test must be non-empty".into()));
        }
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.test) {
            if i >= n || seen[i] {
                return Err(Error::InvalidInput(format!(
                    "row {i} is out of range or assigned twice"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidInput("split does not cover every row".into()));
        }
        Ok(())
    }
}

/// Formats like C's `%.17g`: enough digits to round-trip any `f64`.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let neg = mant.starts_with('-');
    let digits: String = mant.chars().filter(char::is_ascii_digit).collect();
    let sign = if neg { "-" } else { "" };
    if !(-5..17).contains(&exp) {
        let d = digits.trim_end_matches('0');
        let (head, tail) = d.split_at(1);
        return if tail.is_empty() {
            format!("{sign}{head}e{exp}")
        } else {
            format!("{sign}{head}.{tail}e{exp}")
        };
    }
    let s = if exp >= 0 {
        let point = exp as usize + 1;
        let (int, frac) = digits.split_at(point.min(digits.len()));
        format!("{int}.{frac}")
    } else {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    };
    let s = s.trim_end_matches('0').trim_end_matches('.');
    format!("{sign}{s}")
}

/// Reads a CSV whose header lists `schema` names in order, optionally with a
/// `label` column at any position.
pub fn load_dataset_csv(path: impl AsRef<Path>, schema: &[FeatureSpec]) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset_csv(file, schema)
}

pub fn read_dataset_csv<R: Read>(reader: R, schema: &[FeatureSpec]) -> Result<Dataset> {
    validate_specs(schema)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let label_pos = header.iter().position(|h| h == LABEL_COLUMN);
    let feature_headers: Vec<&str> = header.iter().filter(|h| *h != LABEL_COLUMN).collect();
    for (column, spec) in schema.iter().enumerate() {
        let found = feature_headers.get(column).copied().unwrap_or("<none>");
        if found != spec.name {
            return Err(Error::HeaderMismatch {
                column,
                expected: spec.name.clone(),
                found: found.to_string(),
            });
        }
    }
    if feature_headers.len() != schema.len() {
        return Err(Error::HeaderMismatch {
            column: schema.len(),
            expected: "<end of header>".into(),
            found: feature_headers[schema.len()].to_string(),
        });
    }

    let mut columns: Vec<Vec<Cell>> = vec![Vec::new(); schema.len()];
    let mut labels = label_pos.map(|_| Vec::new());
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != header.len() {
            return Err(Error::Cell {
                row,
                column: "<row>".into(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let mut j = 0;
        for (pos, raw) in record.iter().enumerate() {
            if Some(pos) == label_pos {
                let y = match raw.trim() {
                    "0" => 0,
                    "1" => 1,
                    other => {
                        return Err(Error::Cell {
                            row,
                            column: LABEL_COLUMN.into(),
                            message: format!("label `{other}` is not 0/1"),
                        })
                    }
                };
                labels.as_mut().expect("label column").push(y);
                continue;
            }
            columns[j].push(parse_cell(&schema[j], raw, row)?);
            j += 1;
        }
    }
    Dataset::new(schema.to_vec(), columns, labels)
}

fn parse_cell(spec: &FeatureSpec, raw: &str, row: usize) -> Result<Cell> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(Cell::Missing);
    }
    let err = |message: String| Error::Cell {
        row,
        column: spec.name.clone(),
        message,
    };
    match &spec.kind {
        FeatureKind::Categorical { levels } => levels
            .iter()
            .position(|l| l == raw)
            .map(Cell::Level)
            .ok_or_else(|| err(format!("unknown level `{raw}`"))),
        FeatureKind::Numeric | FeatureKind::Binary => {
            let v: f64 = raw
                .parse()
                .map_err(|_| err(format!("`{raw}` is not a number")))?;
            if !v.is_finite() {
                return Err(err(format!("`{raw}` is not finite")));
            }
            if spec.kind == FeatureKind::Binary && v != 0.0 && v != 1.0 {
                return Err(err(format!("binary value `{raw}` must be 0 or 1")));
            }
            Ok(Cell::Value(v))
        }
    }
}

/// Guesses a schema from a CSV: columns whose values are all 0/1 are
/// binary, other all-numeric columns numeric, anything else categorical
/// with levels in sorted order. Empty cells are ignored.
pub fn infer_schema_csv(path: impl AsRef<Path>) -> Result<Vec<FeatureSpec>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    infer_schema(file)
}

pub fn infer_schema<R: Read>(reader: R) -> Result<Vec<FeatureSpec>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols: Vec<usize> = (0..header.len()).filter(|&j| &header[j] != LABEL_COLUMN).collect();
    let mut numeric = vec![true; header.len()];
    let mut binary = vec![true; header.len()];
    let mut levels: Vec<std::collections::BTreeSet<String>> = vec![Default::default(); header.len()];
    for record in rdr.records() {
        let record = record?;
        for &j in &cols {
            let raw = record.get(j).unwrap_or("").trim();
            if raw.is_empty() {
                continue;
            }
            levels[j].insert(raw.to_string());
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => binary[j] &= v == 0.0 || v == 1.0,
                _ => numeric[j] = false,
            }
        }
    }
    Ok(cols
        .into_iter()
        .map(|j| {
            let name = header[j].to_string();
            if numeric[j] && binary[j] && !levels[j].is_empty() {
                FeatureSpec::binary(name)
            } else if numeric[j] {
                FeatureSpec::numeric(name, "")
            } else {
                let lv: Vec<&str> = levels[j].iter().map(String::as_str).collect();
                FeatureSpec::categorical(name, &lv)
            }
        })
        .collect())
}

pub fn write_dataset_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset_csv_to(d, BufWriter::new(file))
}

pub fn write_dataset_csv_to<W: Write>(d: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = d.feature_names();
    if d.labels().is_some() {
        header.push(LABEL_COLUMN.into());
    }
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..d.n_rows() {
        record.clear();
        for (spec, col) in d.specs.iter().zip(&d.columns) {
            record.push(match (col[i], &spec.kind) {
                (Cell::Value(v), _) => fmt_g17(v),
                (Cell::Level(l), FeatureKind::Categorical { levels }) => levels[l].clone(),
                (Cell::Level(l), _) => l.to_string(),
                (Cell::Missing, _) => String::new(),
            });
        }
        if let Some(l) = d.labels() {
            record.push(l[i].to_string());
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Serializes `report` as pretty JSON with lexicographically sorted keys.
pub fn report_json_string<T: Serialize + ?Sized>(report: &T) -> Result<String> {
    // serde_json::Value keeps object keys in a BTreeMap
    let value = serde_json::to_value(report)?;
    let mut s = serde_json::to_string_pretty(&value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_report_json<T: Serialize + ?Sized>(report: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let s = report_json_string(report)?;
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_report_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&s)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn schema_inference() {
        let csv = "a,b,label,c\n0,1.5,1,x\n1,,0,y\n,2,1,x\n";
        let s = infer_schema(csv.as_bytes()).unwrap();
        assert_eq!(
            s,
            vec![
                FeatureSpec::binary("a"),
                FeatureSpec::numeric("b", ""),
                FeatureSpec::categorical("c", &["x", "y"]),
            ]
        );
    }

    fn age_schema() -> Vec<FeatureSpec> {
        vec![FeatureSpec::numeric("age", "years")]
    }

    #[test]
    fn two_row_file_with_label() {
        let d = read_dataset_csv("age,label\n40,0\n61,1\n".as_bytes(), &age_schema()).unwrap();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(d.n_features(), 1);
        assert_eq!(d.labels(), Some(&[0u8, 1][..]));
        assert!(d.provenance().iter().all(|p| *p == Provenance::Original));
    }

    #[test]
    fn empty_cell_is_missing() {
        let d = read_dataset_csv("age\n\n3\n".as_bytes(), &age_schema());
        // the csv reader skips fully empty lines, so use a two-column file
        assert!(d.is_ok());
        let schema = vec![FeatureSpec::numeric("age", ""), FeatureSpec::numeric("bun", "")];
        let d = read_dataset_csv("age,bun\n,4\n5,6\n".as_bytes(), &schema).unwrap();
        assert!(d.column(0)[0].is_missing());
        assert_eq!(d.column(1)[0], Cell::Value(4.0));
    }

    #[test]
    fn header_mismatch_is_located() {
        let err = read_dataset_csv("agee,label\n1,0\n".as_bytes(), &age_schema()).unwrap_err();
        assert!(matches!(err, Error::HeaderMismatch { column: 0, .. }), "{err}");
    }

    #[test]
    fn bad_number_and_ragged_row_are_located() {
        let err = read_dataset_csv("age,label\n1,0\nabc,1\n".as_bytes(), &age_schema()).unwrap_err();
        assert!(matches!(err, Error::Cell { row: 2, .. }), "{err}");
        let err = read_dataset_csv("age,label\n1,0,9\n".as_bytes(), &age_schema()).unwrap_err();
        assert!(matches!(err, Error::Cell { row: 1, .. }), "{err}");
    }

    #[test]
    fn column_length_mismatch_rejected() {
        let specs = vec![FeatureSpec::numeric("a", ""), FeatureSpec::numeric("b", "")];
        let cols = vec![vec![Cell::Value(1.0)], vec![]];
        assert!(Dataset::new(specs, cols, None).is_err());
    }

    #[test]
    fn categorical_levels_must_be_unique() {
        let specs = vec![FeatureSpec::categorical("eth", &["a", "a"])];
        assert!(Dataset::new(specs, vec![vec![]], None).is_err());
    }

    #[test]
    fn g17_formatting() {
        assert_eq!(fmt_g17(0.5), "0.5");
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(-2.0), "-2");
        assert_eq!(fmt_g17(836.0), "836");
        assert_eq!(fmt_g17(1e-7), "9.9999999999999995e-8");
        assert_eq!(fmt_g17(1e20), "1e20");
        assert_eq!(fmt_g17(0.0), "0");
    }

    #[test]
    fn empty_report_is_valid_json() {
        #[derive(Serialize)]
        struct Empty {}
        let s = report_json_string(&Empty {}).unwrap();
        assert_eq!(s.trim(), "{}");
    }

    proptest! {
        #[test]
        fn g17_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let s = fmt_g17(x);
            prop_assert_eq!(s.parse::<f64>().unwrap(), x);
        }

        #[test]
        fn csv_round_trip_is_cell_exact(
            rows in proptest::collection::vec((-1e6f64..1e6, proptest::bool::ANY, 0u8..2), 1..30)
        ) {
            let schema = vec![FeatureSpec::numeric("x", ""), FeatureSpec::binary("flag")];
            let cols = vec![
                rows.iter().map(|r| Cell::Value(r.0)).collect(),
                rows.iter().map(|r| if r.1 { Cell::Value(1.0) } else { Cell::Missing }).collect(),
            ];
            let labels = rows.iter().map(|r| r.2).collect();
            let d = Dataset::new(schema.clone(), cols, Some(labels)).unwrap();
            let mut buf = Vec::new();
            write_dataset_csv_to(&d, &mut buf).unwrap();
            let back = read_dataset_csv(buf.as_slice(), &schema).unwrap();
            prop_assert_eq!(back, d);
        }
    }
}
