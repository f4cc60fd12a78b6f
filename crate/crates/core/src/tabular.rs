//! CSV ingestion: header row, comma delimiter, numeric cells.

use std::io::Read;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Raw CSV cells with their header.
#[derive(Clone, Debug)]
pub struct CsvTable {
    headers: Vec<String>,
    records: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.iter().map(str::to_owned).collect();
        let records = rdr
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_owned).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        Ok(Self { headers, records })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn n_rows(&self) -> usize {
        self.records.len()
    }

    fn column_index(&self, name: &str) -> Result<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_owned()))
    }

    pub fn numeric_column(&self, name: &str) -> Result<Array1<f64>> {
        let j = self.column_index(name)?;
        self.records
            .iter()
            .enumerate()
            .map(|(i, rec)| parse_cell(name, i + 1, &rec[j]))
            .collect::<Result<Vec<f64>>>()
            .map(Array1::from)
    }

    /// Matrix of the named columns, in the given order.
    pub fn numeric_columns(&self, names: &[String]) -> Result<Array2<f64>> {
        let idx: Vec<usize> = names.iter().map(|n| self.column_index(n)).collect::<Result<_>>()?;
        let mut x = Array2::<f64>::zeros((self.records.len(), names.len()));
        for (i, rec) in self.records.iter().enumerate() {
            for (k, &j) in idx.iter().enumerate() {
                x[[i, k]] = parse_cell(&names[k], i + 1, &rec[j])?;
            }
        }
        Ok(x)
    }
}

fn parse_cell(column: &str, row: usize, cell: &str) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonNumericColumn { column: column.to_owned(), row, value: cell.to_owned() }),
    }
}

/// A real-world dataset: every non-target column is a numeric feature.
#[derive(Clone, Debug)]
pub struct TabularDataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub features: Array2<f64>,
    pub target: Array1<f64>,
}

impl TabularDataset {
    pub fn from_table(name: impl Into<String>, table: &CsvTable, target_col: &str) -> Result<Self> {
        let target = table.numeric_column(target_col)?;
        let feature_names: Vec<String> = table.headers().iter().filter(|h| *h != target_col).cloned().collect();
        if feature_names.is_empty() {
            return Err(Error::InvalidInput("no feature columns besides the target".into()));
        }
        let features = table.numeric_columns(&feature_names)?;
        if features.nrows() == 0 {
            return Err(Error::InvalidInput("dataset has no rows".into()));
        }
        Ok(Self { name: name.into(), feature_names, target_name: target_col.to_owned(), features, target })
    }

    /// Reads a CSV file; the dataset is named after the file stem.
    pub fn from_path(path: impl AsRef<Path>, target_col: &str) -> Result<Self> {
        let path = path.as_ref();
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into());
        Self::from_table(name, &CsvTable::from_path(path)?, target_col)
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }
}
