//! Tabular training data: CSV ingestion, validation and axis scaling weights.
//!
//! A [`Dataset`] stores its features column-major (one `Vec<f64>` per axis),
//! which is the layout every per-axis computation downstream wants.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// N samples of d real parameters with one real target each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset")]
pub struct Dataset {
    axis_names: Vec<String>,
    target_name: String,
    columns: Vec<Vec<f64>>,
    y: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDataset {
    axis_names: Vec<String>,
    target_name: String,
    columns: Vec<Vec<f64>>,
    y: Vec<f64>,
}

impl TryFrom<RawDataset> for Dataset {
    type Error = Error;

    fn try_from(raw: RawDataset) -> Result<Self> {
        Dataset::new(raw.axis_names, raw.target_name, raw.columns, raw.y)
    }
}

impl Dataset {
    /// Builds a validated dataset from column-major features.
    pub fn new(
        axis_names: Vec<String>,
        target_name: impl Into<String>,
        columns: Vec<Vec<f64>>,
        y: Vec<f64>,
    ) -> Result<Self> {
        if axis_names.is_empty() || axis_names.len() != columns.len() {
            return Err(Error::InvalidInput(format!(
                "{} axis names for {} feature columns",
                axis_names.len(),
                columns.len()
            )));
        }
        let n = y.len();
        if n < 2 {
            return Err(Error::TooFewRows {
                required: 2,
                found: n,
            });
        }
        for (name, col) in axis_names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::InvalidInput(format!(
                    "axis `{name}` has {} values, expected {n}",
                    col.len()
                )));
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonNumericCell {
                    row: row + 1,
                    column: name.clone(),
                });
            }
            if col.iter().all(|&v| v == col[0]) {
                return Err(Error::ConstantAxis(name.clone()));
            }
        }
        let target_name = target_name.into();
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonNumericCell {
                row: row + 1,
                column: target_name,
            });
        }
        Ok(Self {
            axis_names,
            target_name,
            columns,
            y,
        })
    }

    /// Convenience constructor with generated axis names `x1..xd` and target `y`.
    pub fn from_columns(columns: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let names = (1..=columns.len()).map(|s| format!("x{s}")).collect();
        Self::new(names, "y", columns, y)
    }

    /// Builds a dataset from row-major points.
    pub fn from_rows(points: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let d = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::InvalidInput("ragged feature rows".into()));
        }
        let columns = (0..d)
            .map(|s| points.iter().map(|p| p[s]).collect())
            .collect();
        Self::from_columns(columns, y)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    pub fn axis_names(&self) -> &[String] {
        &self.axis_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    /// All values of axis `s`, in sample order.
    pub fn axis(&self, s: usize) -> &[f64] {
        &self.columns[s]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self, i: usize, s: usize) -> f64 {
        self.columns[s][i]
    }

    /// Sample `i` as a d-vector.
    pub fn point(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Same features, different target vector.
    pub fn with_target(&self, target_name: impl Into<String>, y: Vec<f64>) -> Result<Self> {
        Self::new(
            self.axis_names.clone(),
            target_name,
            self.columns.clone(),
            y,
        )
    }

    /// Keeps the samples at `indices` (in that order).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .map(|c| indices.iter().map(|&i| c[i]).collect())
            .collect();
        let y = indices.iter().map(|&i| self.y[i]).collect();
        Self::new(
            self.axis_names.clone(),
            self.target_name.clone(),
            columns,
            y,
        )
    }

    /// Writes the dataset as CSV with the target as last column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.axis_names.iter().map(String::as_str).collect();
        header.push(&self.target_name);
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut row: Vec<String> = self.columns.iter().map(|c| format_float(c[i])).collect();
            row.push(format_float(self.y[i]));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

/// A dataset whose target is a class label.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    /// Features; the target vector holds the label index as a float.
    pub dataset: Dataset,
    pub labels: Vec<usize>,
    /// Class names in label-index order (sorted lexicographically at load).
    pub class_names: Vec<String>,
}

/// Raw string table read from CSV.
struct Table {
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.iter().map(str::to_owned).collect();
    let rows = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Table { header, rows })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn parse_cell(rows: &[csv::StringRecord], row: usize, col: usize, name: &str) -> Result<f64> {
    rows[row]
        .get(col)
        .and_then(|s| s.parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::NonNumericCell {
            row: row + 1,
            column: name.to_owned(),
        })
}

fn split_features(
    table: &Table,
    target_column: &str,
) -> Result<(usize, Vec<String>, Vec<Vec<f64>>)> {
    let target = table
        .header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::MissingColumn(target_column.to_owned()))?;
    if table.rows.len() < 2 {
        return Err(Error::TooFewRows {
            required: 2,
            found: table.rows.len(),
        });
    }
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for (c, name) in table.header.iter().enumerate() {
        if c == target {
            continue;
        }
        let col = (0..table.rows.len())
            .map(|r| parse_cell(&table.rows, r, c, name))
            .collect::<Result<Vec<_>>>()?;
        names.push(name.clone());
        columns.push(col);
    }
    if names.is_empty() {
        return Err(Error::InvalidInput(
            "no feature columns besides the target".into(),
        ));
    }
    Ok((target, names, columns))
}

/// Reads a regression dataset: every column except `target_column` is an axis.
pub fn read_csv<R: Read>(reader: R, target_column: &str) -> Result<Dataset> {
    let table = read_table(reader)?;
    let (target, names, columns) = split_features(&table, target_column)?;
    let y = (0..table.rows.len())
        .map(|r| parse_cell(&table.rows, r, target, target_column))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(names, target_column, columns, y)
}

pub fn load_csv(path: impl AsRef<Path>, target_column: &str) -> Result<Dataset> {
    read_csv(open(path.as_ref())?, target_column)
}

/// Reads a classification dataset whose target column holds class names.
pub fn read_labeled_csv<R: Read>(reader: R, target_column: &str) -> Result<LabeledDataset> {
    let table = read_table(reader)?;
    let (target, names, columns) = split_features(&table, target_column)?;
    let raw: Vec<String> = table
        .rows
        .iter()
        .map(|r| r.get(target).unwrap_or("").to_owned())
        .collect();
    let class_names: Vec<String> = raw
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let labels: Vec<usize> = raw
        .iter()
        .map(|c| {
            class_names
                .binary_search(c)
                .expect("label drawn from class set")
        })
        .collect();
    let y = labels.iter().map(|&l| l as f64).collect();
    let dataset = Dataset::new(names, target_column, columns, y)?;
    Ok(LabeledDataset {
        dataset,
        labels,
        class_names,
    })
}

pub fn load_labeled_csv(path: impl AsRef<Path>, target_column: &str) -> Result<LabeledDataset> {
    read_labeled_csv(open(path.as_ref())?, target_column)
}

/// Query points read for prediction, with optional ground truth.
#[derive(Debug, Clone, Default)]
pub struct QueryTable {
    pub points: Vec<Vec<f64>>,
    pub targets: Option<Vec<f64>>,
}

/// Feature columns of `table` in `axis_names` order, after checking that the
/// header names exactly those axes apart from the column at `skip`.
fn query_points(
    table: &Table,
    axis_names: &[String],
    skip: Option<usize>,
) -> Result<Vec<Vec<f64>>> {
    let features: Vec<&String> = table
        .header
        .iter()
        .enumerate()
        .filter(|(c, _)| Some(*c) != skip)
        .map(|(_, h)| h)
        .collect();
    let missing: Vec<&str> = axis_names
        .iter()
        .filter(|a| !features.contains(a))
        .map(String::as_str)
        .collect();
    let extra: Vec<&str> = features
        .iter()
        .filter(|f| !axis_names.contains(f))
        .map(|f| f.as_str())
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::SchemaMismatch(format!(
            "missing axes [{}], unexpected columns [{}]",
            missing.join(", "),
            extra.join(", ")
        )));
    }
    let cols: Vec<usize> = axis_names
        .iter()
        .map(|a| {
            table
                .header
                .iter()
                .position(|h| h == a)
                .expect("checked above")
        })
        .collect();
    (0..table.rows.len())
        .map(|r| {
            cols.iter()
                .zip(axis_names)
                .map(|(&c, name)| parse_cell(&table.rows, r, c, name))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Reads query points whose header must name exactly the model axes, plus
/// optionally `target_column`. Zero data rows are allowed.
pub fn read_queries<R: Read>(
    reader: R,
    axis_names: &[String],
    target_column: Option<&str>,
) -> Result<QueryTable> {
    let table = read_table(reader)?;
    let target = target_column.and_then(|t| table.header.iter().position(|h| h == t));
    let points = query_points(&table, axis_names, target)?;
    let targets = match (target, target_column) {
        (Some(t), Some(name)) => Some(
            (0..table.rows.len())
                .map(|r| parse_cell(&table.rows, r, t, name))
                .collect::<Result<Vec<_>>>()?,
        ),
        _ => None,
    };
    Ok(QueryTable { points, targets })
}

/// Query points with the text of their label column, when present.
pub type LabeledPoints = (Vec<Vec<f64>>, Option<Vec<String>>);

/// Like [`read_queries`], but an optional `label_column` holds class names
/// and is returned as text.
pub fn read_labeled_queries<R: Read>(
    reader: R,
    axis_names: &[String],
    label_column: &str,
) -> Result<LabeledPoints> {
    let table = read_table(reader)?;
    let label = table.header.iter().position(|h| h == label_column);
    let points = query_points(&table, axis_names, label)?;
    let labels = label.map(|c| {
        table
            .rows
            .iter()
            .map(|r| r.get(c).unwrap_or("").to_owned())
            .collect()
    });
    Ok((points, labels))
}

pub fn load_queries(
    path: impl AsRef<Path>,
    axis_names: &[String],
    target_column: Option<&str>,
) -> Result<QueryTable> {
    read_queries(open(path.as_ref())?, axis_names, target_column)
}

/// How the per-axis weights `w_s` of the zonal sum are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightPolicy {
    #[default]
    Unit,
    /// `w_s = 1 / sample standard deviation` of axis s.
    InverseStddev,
}

/// Strictly positive, finite per-axis weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AxisWeights(Vec<f64>);

impl AxisWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || w.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "axis weights must be positive and finite: {w:?}"
            )));
        }
        Ok(Self(w))
    }

    pub fn unit(d: usize) -> Self {
        Self(vec![1.0; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, s: usize) -> f64 {
        self.0[s]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for AxisWeights {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<AxisWeights> for Vec<f64> {
    fn from(w: AxisWeights) -> Self {
        w.0
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard deviation with the N-1 denominator.
pub fn sample_std(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

pub fn compute_axis_weights(ds: &Dataset, policy: WeightPolicy) -> AxisWeights {
    match policy {
        WeightPolicy::Unit => AxisWeights::unit(ds.d()),
        // Constant axes are rejected at construction, so every stddev is > 0.
        WeightPolicy::InverseStddev => {
            AxisWeights((0..ds.d()).map(|s| 1.0 / sample_std(ds.axis(s))).collect())
        }
    }
}
