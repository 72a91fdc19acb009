//! Labelled samples and their CSV representation.
//!
//! The on-disk format is a header `x1,...,xd,y` followed by one row per
//! instance, with `y` in `{-1, 1}`. Reading accepts any feature column names
//! so precomputed score columns can ride along with the features.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary label stored with the `{-1, +1}` sign convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(i8)]
pub enum Label {
    Neg = -1,
    Pos = 1,
}

impl Label {
    pub fn from_sign(y: i64) -> Result<Self> {
        match y {
            1 => Ok(Label::Pos),
            -1 => Ok(Label::Neg),
            other => Err(Error::invalid(format!("label must be -1 or 1, got {other}"))),
        }
    }

    pub fn sign(self) -> i8 {
        self as i8
    }

    pub fn is_pos(self) -> bool {
        self == Label::Pos
    }
}

/// Counts of each class in a label vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub pos: usize,
    pub neg: usize,
}

impl ClassCounts {
    pub fn of(labels: &[Label]) -> Self {
        let pos = labels.iter().filter(|l| l.is_pos()).count();
        ClassCounts {
            pos,
            neg: labels.len() - pos,
        }
    }

    pub fn total(&self) -> usize {
        self.pos + self.neg
    }

    pub(crate) fn require_both(self, statistic: &'static str) -> Result<Self> {
        if self.pos == 0 || self.neg == 0 {
            Err(Error::SingleClass {
                statistic,
                positives: self.pos,
                negatives: self.neg,
            })
        } else {
            Ok(self)
        }
    }
}

/// An `n x d` feature matrix (row-major) with one label per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<Label>,
    names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<Label>) -> Result<Self> {
        let names = (1..=dim).map(|j| format!("x{j}")).collect();
        Self::with_names(features, names, labels)
    }

    pub fn with_names(features: Vec<f64>, names: Vec<String>, labels: Vec<Label>) -> Result<Self> {
        let dim = names.len();
        if dim == 0 {
            return Err(Error::invalid("dataset needs at least one feature column"));
        }
        if labels.is_empty() {
            return Err(Error::invalid("dataset needs at least one row"));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::invalid(format!(
                "feature buffer has {} values, expected {} x {}",
                features.len(),
                labels.len(),
                dim
            )));
        }
        if let Some(bad) = features.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite feature value {bad}")));
        }
        Ok(Dataset {
            features,
            dim,
            labels,
            names,
        })
    }

    /// One-dimensional dataset from parallel feature and label vectors.
    pub fn from_1d(xs: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        Self::new(xs, 1, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    pub fn counts(&self) -> ClassCounts {
        ClassCounts::of(&self.labels)
    }

    /// Values of the named feature column.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::invalid(format!("no column named '{name}'")))?;
        Ok(self.rows().map(|r| r[j]).collect())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let y_col = headers
            .iter()
            .position(|h| h == "y")
            .ok_or_else(|| Error::invalid("CSV header has no 'y' column"))?;
        let names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != y_col)
            .map(|(_, h)| h.to_string())
            .collect();
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            for (j, field) in record.iter().enumerate() {
                if j == y_col {
                    let y: i64 = field
                        .parse()
                        .map_err(|_| Error::invalid(format!("row {}: bad label '{field}'", line + 1)))?;
                    labels.push(Label::from_sign(y)?);
                } else {
                    let v: f64 = field
                        .parse()
                        .map_err(|_| Error::invalid(format!("row {}: bad number '{field}'", line + 1)))?;
                    features.push(v);
                }
            }
        }
        Self::with_names(features, names, labels)
    }

    /// Writes the canonical `x1,...,xd,y` format.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        wtr.write_record(&header)?;
        for (row, label) in self.rows().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(label.sign().to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}
