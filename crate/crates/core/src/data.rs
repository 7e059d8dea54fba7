//! Incomplete and completed tabular data.
//!
//! Missing cells are carried by an explicit mask. The value slot of a masked
//! cell holds `NaN` as a placeholder and must never be read as data.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Columns with at most this many distinct observed values are discrete.
pub const DISCRETE_MAX_LEVELS: usize = 20;

/// Markers treated as missing when none are supplied.
pub const DEFAULT_NA_MARKERS: [&str; 3] = ["NA", "", "nan"];

/// Dense column-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from equally long columns.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows * cols);
        for c in columns {
            assert_eq!(c.len(), rows, "ragged columns");
            data.extend(c);
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let mut m = Matrix::zeros(n, p);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), p, "ragged rows");
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.rows + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[col * self.rows + row] = value;
    }

    #[inline]
    pub fn column(&self, col: usize) -> &[f64] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    #[inline]
    pub fn column_mut(&mut self, col: usize) -> &mut [f64] {
        &mut self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.cols).map(|c| self.get(row, c)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for c in 0..self.cols {
            let col = self.column(c);
            data.extend(rows.iter().map(|&r| col[r]));
        }
        Matrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for &c in cols {
            data.extend_from_slice(self.column(c));
        }
        Matrix {
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }

    /// Rows and columns picked in one pass.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &c in cols {
            let col = self.column(c);
            data.extend(rows.iter().map(|&r| col[r]));
        }
        Matrix {
            rows: rows.len(),
            cols: cols.len(),
            data,
        }
    }

    pub fn push_column(&mut self, column: &[f64]) {
        assert_eq!(column.len(), self.rows);
        self.data.extend_from_slice(column);
        self.cols += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Discrete,
    Continuous,
}

/// Applies the distinct-value rule to a set of observed values.
pub fn kind_of_values<'a>(values: impl IntoIterator<Item = &'a f64>) -> ColumnKind {
    let mut seen: HashSet<u64> = HashSet::new();
    for &v in values {
        // -0.0 and 0.0 are one level
        let v = if v == 0.0 { 0.0 } else { v };
        seen.insert(v.to_bits());
        if seen.len() > DISCRETE_MAX_LEVELS {
            return ColumnKind::Continuous;
        }
    }
    ColumnKind::Discrete
}

/// An `n x p` table with a missingness mask (`true` = observed).
#[derive(Debug, Clone, PartialEq)]
pub struct IncompleteDataset {
    values: Matrix,
    mask: Vec<bool>,
    column_names: Vec<String>,
    column_kinds: Vec<ColumnKind>,
}

impl IncompleteDataset {
    /// Validates shapes, blanks masked cells and infers column kinds.
    pub fn new(mut values: Matrix, mask: Vec<bool>, column_names: Vec<String>) -> Result<Self> {
        let (n, p) = (values.rows(), values.cols());
        if n == 0 || p == 0 {
            return Err(Error::Validation(format!("dataset must be non-empty, got {n}x{p}")));
        }
        if mask.len() != n * p {
            return Err(Error::Validation(format!(
                "mask has {} cells, values have {}",
                mask.len(),
                n * p
            )));
        }
        if column_names.len() != p {
            return Err(Error::Validation(format!(
                "{} column names for {p} columns",
                column_names.len()
            )));
        }
        for j in 0..p {
            let col_mask = &mask[j * n..(j + 1) * n];
            if !col_mask.iter().any(|&o| o) {
                return Err(Error::Validation(format!(
                    "column '{}' is entirely missing",
                    column_names[j]
                )));
            }
            let col = values.column_mut(j);
            for (i, observed) in col_mask.iter().enumerate() {
                if *observed {
                    if !col[i].is_finite() {
                        return Err(Error::Validation(format!(
                            "non-finite observed value in column '{}' row {i}",
                            column_names[j]
                        )));
                    }
                } else {
                    col[i] = f64::NAN;
                }
            }
        }
        let mut ds = IncompleteDataset {
            values,
            mask,
            column_names,
            column_kinds: Vec::new(),
        };
        ds.column_kinds = infer_kinds(&ds);
        Ok(ds)
    }

    /// Wraps a fully observed matrix.
    pub fn from_complete(values: Matrix, column_names: Vec<String>) -> Result<Self> {
        let mask = vec![true; values.rows() * values.cols()];
        Self::new(values, mask, column_names)
    }

    /// Default names `X0, X1, ...`.
    pub fn default_names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("X{j}")).collect()
    }

    pub fn n_rows(&self) -> usize {
        self.values.rows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.mask[col * self.n_rows() + row]
    }

    pub fn column_mask(&self, col: usize) -> &[bool] {
        let n = self.n_rows();
        &self.mask[col * n..(col + 1) * n]
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column_kinds(&self) -> &[ColumnKind] {
        &self.column_kinds
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn observed_values(&self, col: usize) -> Vec<f64> {
        self.values
            .column(col)
            .iter()
            .zip(self.column_mask(col))
            .filter_map(|(&v, &o)| o.then_some(v))
            .collect()
    }

    pub fn observed_rows(&self, col: usize) -> Vec<usize> {
        self.column_mask(col)
            .iter()
            .enumerate()
            .filter_map(|(i, &o)| o.then_some(i))
            .collect()
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|&&o| !o).count()
    }

    pub fn column_missing_count(&self, col: usize) -> usize {
        self.column_mask(col).iter().filter(|&&o| !o).count()
    }

    /// Rows observed on every listed column.
    pub fn complete_rows(&self, cols: &[usize]) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&i| cols.iter().all(|&c| self.is_observed(i, c)))
            .collect()
    }
}

/// Kind of every column under the distinct-value rule.
pub fn infer_kinds(data: &IncompleteDataset) -> Vec<ColumnKind> {
    (0..data.n_cols())
        .map(|j| {
            let col = data.values.column(j);
            kind_of_values(
                col.iter()
                    .zip(data.column_mask(j))
                    .filter_map(|(v, &o)| o.then_some(v)),
            )
        })
        .collect()
}

/// Which imputer produced a stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputerKind {
    Mice,
    Mean,
    Marginal,
}

/// `M` completed copies of one incomplete dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedStack {
    datasets: Vec<Matrix>,
    imputer: ImputerKind,
    seed: u64,
    source_mask: Vec<bool>,
    column_names: Vec<String>,
    column_kinds: Vec<ColumnKind>,
}

impl ImputedStack {
    pub(crate) fn new(
        datasets: Vec<Matrix>,
        imputer: ImputerKind,
        seed: u64,
        source: &IncompleteDataset,
    ) -> Self {
        assert!(!datasets.is_empty(), "a stack holds at least one dataset");
        ImputedStack {
            datasets,
            imputer,
            seed,
            source_mask: source.mask.clone(),
            column_names: source.column_names.clone(),
            column_kinds: source.column_kinds.clone(),
        }
    }

    /// Stack of identical copies of complete data.
    pub fn from_complete(values: Matrix, column_names: Vec<String>, m: usize) -> Result<Self> {
        let ds = IncompleteDataset::from_complete(values, column_names)?;
        Ok(ImputedStack::new(
            vec![ds.values.clone(); m.max(1)],
            ImputerKind::Mean,
            0,
            &ds,
        ))
    }

    pub fn m(&self) -> usize {
        self.datasets.len()
    }

    pub fn n_rows(&self) -> usize {
        self.datasets[0].rows()
    }

    pub fn n_cols(&self) -> usize {
        self.datasets[0].cols()
    }

    pub fn datasets(&self) -> &[Matrix] {
        &self.datasets
    }

    pub fn dataset(&self, m: usize) -> &Matrix {
        &self.datasets[m]
    }

    pub fn imputer(&self) -> ImputerKind {
        self.imputer
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn source_mask(&self) -> &[bool] {
        &self.source_mask
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column_kinds(&self) -> &[ColumnKind] {
        &self.column_kinds
    }

    /// Keeps only the first `m` datasets.
    pub fn truncated(&self, m: usize) -> ImputedStack {
        let mut s = self.clone();
        s.datasets.truncate(m.max(1));
        s
    }
}

/// Reads a CSV with a header row. Cells equal (after trimming) to any NA
/// marker become missing.
pub fn load_csv(path: impl AsRef<Path>, na_markers: &[&str]) -> Result<IncompleteDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, na_markers)
}

pub fn read_csv<R: Read>(reader: R, na_markers: &[&str]) -> Result<IncompleteDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let p = names.len();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); p];
    let mut mask_cols: Vec<Vec<bool>> = vec![Vec::new(); p];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != p {
            return Err(Error::Parse {
                row: row + 1,
                column: String::new(),
                message: format!("expected {p} fields, found {}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            if na_markers.contains(&cell) {
                columns[j].push(f64::NAN);
                mask_cols[j].push(false);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: row + 1,
                    column: names[j].clone(),
                    message: format!("'{cell}' is not numeric"),
                })?;
                columns[j].push(v);
                mask_cols[j].push(true);
            }
        }
    }
    let mask = mask_cols.into_iter().flatten().collect();
    IncompleteDataset::new(Matrix::from_columns(columns), mask, names)
}

/// Writes a dataset as CSV, emitting `NA` for missing cells.
pub fn write_csv<W: Write>(data: &IncompleteDataset, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(data.column_names())?;
    for i in 0..data.n_rows() {
        let rec: Vec<String> = (0..data.n_cols())
            .map(|j| {
                if data.is_observed(i, j) {
                    format!("{}", data.values().get(i, j))
                } else {
                    "NA".to_string()
                }
            })
            .collect();
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(data: &IncompleteDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(data, std::io::BufWriter::new(file))
}
