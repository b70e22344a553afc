//! Labeled feature matrices and their CSV interchange format.
//!
//! The matrix CSV has a `subject_id` column, one column per feature and a
//! `label` column (`1` = faller, `0` = non-faller). Feature columns keep their
//! file order.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_NAMES};

/// A cohort's feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    ids: Vec<String>,
    feature_names: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Vec<bool>,
}

impl LabeledDataset {
    /// Validates and builds a dataset.
    ///
    /// Requires at least 4 rows, at least one feature, unique ids, finite
    /// values and both classes present.
    pub fn new(
        ids: Vec<String>,
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<bool>,
    ) -> Result<Self> {
        let n = ids.len();
        if rows.len() != n || labels.len() != n {
            return Err(Error::Validation(format!(
                "{n} ids, {} rows and {} labels do not align",
                rows.len(),
                labels.len()
            )));
        }
        if n < 4 {
            return Err(Error::Infeasible(format!("dataset needs at least 4 subjects, got {n}")));
        }
        if feature_names.is_empty() {
            return Err(Error::Validation("dataset has no feature columns".into()));
        }
        let d = feature_names.len();
        let mut seen = HashSet::with_capacity(n);
        for (id, row) in ids.iter().zip(&rows) {
            if !seen.insert(id.as_str()) {
                return Err(Error::Validation(format!("duplicate subject id `{id}`")));
            }
            if row.len() != d {
                return Err(Error::Validation(format!(
                    "subject `{id}` has {} values, expected {d}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "subject `{id}` has a non-finite `{}`",
                    feature_names[j]
                )));
            }
        }
        let n_pos = labels.iter().filter(|&&l| l).count();
        if n_pos == 0 || n_pos == n {
            return Err(Error::Infeasible("dataset contains a single class".into()));
        }
        Ok(LabeledDataset {
            ids,
            feature_names,
            rows,
            labels,
        })
    }

    /// Builds a dataset from extracted feature vectors and their labels.
    pub fn from_features(features: &[FeatureVector], labels: Vec<bool>) -> Result<Self> {
        LabeledDataset::new(
            features.iter().map(|f| f.subject_id.clone()).collect(),
            FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            features.iter().map(|f| f.values.to_vec()).collect(),
            labels,
        )
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn n_pos(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn n_neg(&self) -> usize {
        self.len() - self.n_pos()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        LabeledDataset::new(
            indices.iter().map(|&i| self.ids[i].clone()).collect(),
            self.feature_names.clone(),
            indices.iter().map(|&i| self.rows[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// Columns at `features`, in that order.
    pub fn select_features(&self, features: &[usize]) -> Result<Self> {
        if let Some(&j) = features.iter().find(|&&j| j >= self.n_features()) {
            return Err(Error::InvalidArgument(format!("feature index {j} out of range")));
        }
        LabeledDataset::new(
            self.ids.clone(),
            features.iter().map(|&j| self.feature_names[j].clone()).collect(),
            self.rows
                .iter()
                .map(|r| features.iter().map(|&j| r[j]).collect())
                .collect(),
            self.labels.clone(),
        )
    }

    /// Row indices sorted by subject id.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.ids[a].cmp(&self.ids[b]));
        order
    }

    /// Parses a matrix CSV. `source` names the input in error messages.
    pub fn read_csv<R: Read>(reader: R, source: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::parse(source, 1, e.to_string()))?
            .clone();
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Validation(format!("{}: missing column `{name}`", source.display())))
        };
        let id_col = find("subject_id")?;
        let label_col = find("label")?;
        let feature_cols: Vec<usize> = (0..headers.len())
            .filter(|&c| c != id_col && c != label_col)
            .collect();
        let feature_names = feature_cols.iter().map(|&c| headers[c].to_string()).collect();

        let (mut ids, mut rows, mut labels) = (Vec::new(), Vec::new(), Vec::new());
        for (i, record) in rdr.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::parse(source, line, e.to_string()))?;
            ids.push(record[id_col].to_string());
            let label = match &record[label_col] {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::parse(source, line, format!("label must be 0 or 1, got `{other}`")))
                }
            };
            labels.push(label);
            let row = feature_cols
                .iter()
                .map(|&c| {
                    record[c].parse::<f64>().map_err(|_| {
                        Error::parse(source, line, format!("invalid `{}` value `{}`", &headers[c], &record[c]))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        LabeledDataset::new(ids, feature_names, rows, labels)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        LabeledDataset::read_csv(std::io::BufReader::new(file), path)
    }

    /// Writes the matrix CSV. Values use the shortest round-trip decimal form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let to_err = |e: csv::Error| Error::Validation(format!("writing matrix: {e}"));
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["subject_id".to_string()];
        header.extend(self.feature_names.iter().cloned());
        header.push("label".into());
        w.write_record(&header).map_err(to_err)?;
        for ((id, row), label) in self.ids.iter().zip(&self.rows).zip(&self.labels) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            rec.push(if *label { "1" } else { "0" }.into());
            w.write_record(&rec).map_err(to_err)?;
        }
        w.flush()
            .map_err(|e| Error::io("<matrix>", e))
    }
}
