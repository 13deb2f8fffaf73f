use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

/// Column-major 0/1 data with one designated outcome column.
///
/// Invariants: all columns share the same length, every cell is 0 or 1,
/// column names are unique and non-empty, and the outcome column exists.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryDataset {
    names: Vec<String>,
    cols: Vec<Vec<u8>>,
    outcome: usize,
}

impl BinaryDataset {
    pub fn new(names: Vec<String>, cols: Vec<Vec<u8>>, outcome: &str) -> Result<Self> {
        if names.len() != cols.len() {
            return Err(Error::data("column name count does not match column count"));
        }
        if names.is_empty() {
            return Err(Error::data("dataset has no columns"));
        }
        let n = cols[0].len();
        if n == 0 {
            return Err(Error::data("dataset has no rows"));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.is_empty() {
                return Err(Error::data("empty column name"));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::data(format!("duplicate column name {name}")));
            }
        }
        for (name, col) in names.iter().zip(&cols) {
            if col.len() != n {
                return Err(Error::data(format!("column {name} has mismatched length")));
            }
            if col.iter().any(|&v| v > 1) {
                return Err(Error::data(format!("column {name} contains a non-binary value")));
            }
        }
        let outcome_idx = names
            .iter()
            .position(|c| c == outcome)
            .ok_or_else(|| Error::data(format!("missing outcome column {outcome}")))?;
        Ok(BinaryDataset { names, cols, outcome: outcome_idx })
    }

    pub fn n_rows(&self) -> usize {
        self.cols[0].len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn column(&self, idx: usize) -> &[u8] {
        &self.cols[idx]
    }

    pub fn outcome_index(&self) -> usize {
        self.outcome
    }

    pub fn outcome_name(&self) -> &str {
        &self.names[self.outcome]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|c| c == name)
    }

    pub fn try_index(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::data(format!("unknown column {name}")))
    }

    /// Indices of every non-outcome column, in dataset order.
    pub fn predictor_indices(&self) -> Vec<usize> {
        (0..self.n_cols()).filter(|&i| i != self.outcome).collect()
    }

    /// Keep the given columns (dataset order preserved as listed). The outcome
    /// column must be among them.
    pub fn select_columns(&self, keep: &[usize]) -> Result<Self> {
        let names: Vec<String> = keep.iter().map(|&i| self.names[i].clone()).collect();
        let cols: Vec<Vec<u8>> = keep.iter().map(|&i| self.cols[i].clone()).collect();
        let outcome = self.outcome_name().to_string();
        Self::new(names, cols, &outcome)
    }

    /// Rows resampled with replacement, same size. Draw order is row-major so
    /// the result depends only on the RNG state.
    pub fn bootstrap_sample<R: Rng>(&self, rng: &mut R) -> Self {
        let n = self.n_rows();
        let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let cols = self
            .cols
            .iter()
            .map(|col| idx.iter().map(|&i| col[i]).collect())
            .collect();
        BinaryDataset { names: self.names.clone(), cols, outcome: self.outcome }
    }

    pub fn from_csv_reader<R: Read>(reader: R, outcome: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::data(format!("bad csv header: {e}")))?
            .clone();
        let names: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
        let mut cols: Vec<Vec<u8>> = vec![Vec::new(); names.len()];
        for (rownum, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::data(format!("bad csv row {}: {e}", rownum + 2)))?;
            if rec.len() != names.len() {
                return Err(Error::data(format!(
                    "row {} has {} fields, expected {}",
                    rownum + 2,
                    rec.len(),
                    names.len()
                )));
            }
            for (i, field) in rec.iter().enumerate() {
                let v = match field.trim() {
                    "0" => 0,
                    "1" => 1,
                    other => {
                        return Err(Error::data(format!(
                            "row {} column {}: expected 0 or 1, got {other:?}",
                            rownum + 2,
                            names[i]
                        )))
                    }
                };
                cols[i].push(v);
            }
        }
        Self::new(names, cols, outcome)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, outcome: &str) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(std::io::BufReader::new(file), outcome)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.names.join(","))?;
        let mut line = String::new();
        for r in 0..self.n_rows() {
            line.clear();
            for (i, col) in self.cols.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push(if col[r] == 1 { '1' } else { '0' });
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
