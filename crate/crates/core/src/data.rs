//! Data containers and sample splitting.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Predictor matrix and response; rows are observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: Vec<f64>,
    column_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|k| format!("x{k}")).collect();
        Self::with_names(x, y, names)
    }

    pub fn with_names(x: DMatrix<f64>, y: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::InvalidDataset(format!(
                "{} predictor rows but {} responses",
                x.nrows(),
                y.len()
            )));
        }
        if y.len() < 4 {
            return Err(Error::InvalidDataset(format!("need at least 4 rows, got {}", y.len())));
        }
        if x.ncols() < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 predictors, got {}",
                x.ncols()
            )));
        }
        if column_names.len() != x.ncols() {
            return Err(Error::InvalidDataset(format!(
                "{} column names for {} predictors",
                column_names.len(),
                x.ncols()
            )));
        }
        if let Some((idx, _)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (row, col) = (idx % x.nrows(), idx / x.nrows());
            return Err(Error::InvalidDataset(format!(
                "non-finite predictor at row {row}, column '{}'",
                column_names[col]
            )));
        }
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("non-finite response at row {row}")));
        }
        Ok(Self { x, y, column_names })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_predictors(&self) -> usize {
        self.x.ncols()
    }

    /// Rows `idx` of the predictor matrix, in the given order.
    pub fn x_rows(&self, idx: &[usize]) -> DMatrix<f64> {
        self.x.select_rows(idx)
    }

    pub fn y_rows(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.y[i]).collect()
    }

    /// Reads a CSV with a header; the column named `response` is the response
    /// and every other column is a predictor.
    pub fn from_csv_reader<R: Read>(reader: R, response: &str) -> Result<Self> {
        let malformed = |e: csv::Error| Error::MalformedCsv(e.to_string());
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers().map_err(malformed)?.clone();
        let y_col = headers.iter().position(|h| h.trim() == response).ok_or_else(|| {
            Error::InvalidDataset(format!("no response column named '{response}'"))
        })?;
        let names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != y_col)
            .map(|(_, h)| h.trim().to_string())
            .collect();
        let mut rows: Vec<f64> = Vec::new();
        let mut y = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(malformed)?;
            for (k, field) in record.iter().enumerate() {
                let field = field.trim();
                let column = headers.get(k).unwrap_or("?").trim();
                let value = if field.is_empty() || field.eq_ignore_ascii_case("na") {
                    f64::NAN
                } else {
                    field.parse::<f64>().map_err(|_| {
                        Error::MalformedCsv(format!("row {}: column '{column}' is not numeric: '{field}'", line + 1))
                    })?
                };
                if !value.is_finite() {
                    return Err(Error::NonFiniteColumn {
                        column: column.to_string(),
                        row: line + 1,
                    });
                }
                if k == y_col {
                    y.push(value);
                } else {
                    rows.push(value);
                }
            }
        }
        let x = DMatrix::from_row_slice(y.len(), names.len(), &rows);
        Self::with_names(x, y, names)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?, "y")
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = self.column_names.clone();
        header.push("y".into());
        wtr.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec: Vec<String> = (0..self.n_predictors())
                .map(|k| format!("{}", self.x[(i, k)]))
                .collect();
            rec.push(format!("{}", self.y[i]));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Partition of the rows into a test half D1 and a training half D2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub d1_indices: Vec<usize>,
    pub d2_indices: Vec<usize>,
    pub proportion: f64,
    pub seed: u64,
}

impl SplitAssignment {
    pub fn n_test(&self) -> usize {
        self.d1_indices.len()
    }

    pub fn n_train(&self) -> usize {
        self.d2_indices.len()
    }
}

/// Training-half size for `total` rows: `floor(proportion * total + 0.5)`.
pub fn training_size(total: usize, proportion: f64) -> usize {
    (proportion * total as f64 + 0.5).floor() as usize
}

/// Random split with `round(proportion * N)` training rows (D2); the rest
/// form the test half (D1). Index lists are returned sorted.
pub fn split_data(dataset: &Dataset, proportion: f64, seed: u64) -> Result<SplitAssignment> {
    split_rows(dataset.n_rows(), proportion, seed)
}

pub fn split_rows(total: usize, proportion: f64, seed: u64) -> Result<SplitAssignment> {
    if !(proportion > 0.0 && proportion < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "training proportion must lie in (0, 1), got {proportion}"
        )));
    }
    let m = training_size(total, proportion);
    let n = total - m.min(total);
    for size in [m, n] {
        if size < 2 {
            return Err(Error::SplitTooSmall { size, min: 2 });
        }
    }
    let mut idx: Vec<usize> = (0..total).collect();
    idx.shuffle(&mut rng::stream(seed, Domain::Split));
    let mut d2 = idx[..m].to_vec();
    let mut d1 = idx[m..].to_vec();
    d2.sort_unstable();
    d1.sort_unstable();
    Ok(SplitAssignment {
        d1_indices: d1,
        d2_indices: d2,
        proportion,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(n: usize) -> Dataset {
        let x = DMatrix::from_fn(n, 2, |i, j| (i * 2 + j) as f64);
        Dataset::new(x, (0..n).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn split_sizes_follow_rounding_rule() {
        let s = split_data(&toy(10), 0.4, 7).unwrap();
        assert_eq!(s.n_train(), 4);
        assert_eq!(s.n_test(), 6);
        assert!(s.d1_indices.iter().all(|i| !s.d2_indices.contains(i)));
        assert_eq!(split_rows(2500, 0.4, 1).unwrap().n_train(), 1000);
    }

    #[test]
    fn split_is_deterministic() {
        assert_eq!(split_data(&toy(10), 0.4, 7).unwrap(), split_data(&toy(10), 0.4, 7).unwrap());
        assert_ne!(
            split_data(&toy(50), 0.4, 7).unwrap().d2_indices,
            split_data(&toy(50), 0.4, 8).unwrap().d2_indices
        );
    }

    #[test]
    fn split_rejects_bad_inputs() {
        assert!(split_rows(10, 0.0, 1).is_err());
        assert!(split_rows(10, 1.0, 1).is_err());
        assert!(matches!(split_rows(4, 0.1, 1), Err(Error::SplitTooSmall { .. })));
        assert!(matches!(split_rows(4, 0.9, 1), Err(Error::SplitTooSmall { .. })));
    }

    #[test]
    fn dataset_validation() {
        let x = DMatrix::zeros(3, 2);
        assert!(Dataset::new(x, vec![0.0; 3]).is_err());
        let x = DMatrix::zeros(5, 1);
        assert!(Dataset::new(x, vec![0.0; 5]).is_err());
        let mut x = DMatrix::zeros(5, 2);
        x[(2, 1)] = f64::NAN;
        assert!(Dataset::new(x, vec![0.0; 5]).is_err());
        assert!(Dataset::new(DMatrix::zeros(5, 2), vec![0.0; 4]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let d = toy(6);
        let mut buf = Vec::new();
        d.to_csv_writer(&mut buf).unwrap();
        let back = Dataset::from_csv_reader(buf.as_slice(), "y").unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn csv_errors_are_specific() {
        let bad = "x1,x2,y\n1,2,3\n1,abc,3\n1,2,3\n1,2,3\n";
        let err = Dataset::from_csv_reader(bad.as_bytes(), "y").unwrap_err();
        assert!(matches!(err, Error::MalformedCsv(_)), "{err}");
        let ragged = "x1,x2,y\n1,2,3\n1,3\n";
        let err = Dataset::from_csv_reader(ragged.as_bytes(), "y").unwrap_err();
        assert!(matches!(err, Error::MalformedCsv(_)), "{err}");
        for nan in ["x1,x2,y\n1,2,3\n1,NaN,3\n1,2,3\n1,2,3\n", "x1,x2,y\n1,2,3\n1,,3\n"] {
            let err = Dataset::from_csv_reader(nan.as_bytes(), "y").unwrap_err();
            assert!(matches!(err, Error::NonFiniteColumn { ref column, row: 2 } if column == "x2"), "{err}");
        }
        let no_y = "x1,x2\n1,2\n";
        assert!(Dataset::from_csv_reader(no_y.as_bytes(), "y").is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(total in 4usize..300, prop in 0.05f64..0.95, seed: u64) {
            if let Ok(s) = split_rows(total, prop, seed) {
                let mut all: Vec<usize> = s.d1_indices.iter().chain(&s.d2_indices).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..total).collect::<Vec<_>>());
                prop_assert_eq!(s.n_train(), training_size(total, prop));
            }
        }
    }
}
