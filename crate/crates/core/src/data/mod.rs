//! Tabular datasets with overlapping boolean domain masks.

mod contaminate;
mod csv_io;
mod synth;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use contaminate::{flip_labels, inject_outliers, split, OutlierMode, DEFAULT_BLOWUP};
pub use csv_io::{load_csv, load_features_csv, save_csv};
pub use synth::{prepare_synthetic, synth_subpop, SyntheticSpec};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{file}: row {row}, column {column}: {message}")]
    Parse {
        file: String,
        row: usize,
        column: String,
        message: String,
    },
    #[error("row count mismatch: features file has {features} rows, domains file has {domains}")]
    RowCount { features: usize, domains: usize },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("split error: {0}")]
    Split(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Provenance carried alongside a dataset and written as a JSON sidecar.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    /// Positions (in this dataset) of samples replaced by outliers, ascending.
    pub contaminated: Vec<usize>,
    /// Generator parameters when the data is synthetic.
    pub generator: Option<SyntheticSpec>,
}

/// `n x d` features (row-major), binary labels and `K` domain masks.
///
/// Every row keeps the id it had in the dataset it was first loaded or
/// generated as, so subsets can be traced back to source rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    name: String,
    dim: usize,
    feature_names: Vec<String>,
    features: Vec<f64>,
    labels: Vec<u8>,
    domain_names: Vec<String>,
    domain_masks: Vec<Vec<bool>>,
    row_ids: Vec<usize>,
    metadata: DatasetMetadata,
}

impl TabularDataset {
    pub fn new(
        name: impl Into<String>,
        feature_names: Vec<String>,
        features: Vec<f64>,
        labels: Vec<u8>,
        domain_names: Vec<String>,
        domain_masks: Vec<Vec<bool>>,
    ) -> Result<Self, DataError> {
        let n = labels.len();
        let row_ids = (0..n).collect();
        let ds = Self {
            name: name.into(),
            dim: feature_names.len(),
            feature_names,
            features,
            labels,
            domain_names,
            domain_masks,
            row_ids,
            metadata: DatasetMetadata::default(),
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<(), DataError> {
        let n = self.labels.len();
        if n == 0 {
            return Err(DataError::Validation("dataset has no rows".into()));
        }
        if self.dim == 0 {
            return Err(DataError::Validation("dataset has no features".into()));
        }
        if self.features.len() != n * self.dim {
            return Err(DataError::Validation(format!(
                "{} feature values for {n} rows of {} features",
                self.features.len(),
                self.dim
            )));
        }
        if let Some(v) = self.features.iter().find(|v| !v.is_finite()) {
            return Err(DataError::Validation(format!(
                "non-finite feature value {v}"
            )));
        }
        if let Some(y) = self.labels.iter().find(|y| **y > 1) {
            return Err(DataError::Validation(format!("label {y} is not 0 or 1")));
        }
        if self.domain_names.len() != self.domain_masks.len() {
            return Err(DataError::Validation(format!(
                "{} domain names for {} masks",
                self.domain_names.len(),
                self.domain_masks.len()
            )));
        }
        for (name, mask) in self.domain_names.iter().zip(&self.domain_masks) {
            if mask.len() != n {
                return Err(DataError::Validation(format!(
                    "domain {name} has {} entries for {n} rows",
                    mask.len()
                )));
            }
            if !mask.iter().any(|m| *m) {
                return Err(DataError::Validation(format!("empty domain {name}")));
            }
        }
        if self.row_ids.len() != n {
            return Err(DataError::Validation("row ids out of sync".into()));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
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

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> Vec<&[f64]> {
        self.features.chunks_exact(self.dim).collect()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn domain_names(&self) -> &[String] {
        &self.domain_names
    }

    pub fn domain_masks(&self) -> &[Vec<bool>] {
        &self.domain_masks
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn metadata(&self) -> &DatasetMetadata {
        &self.metadata
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub(crate) fn labels_mut(&mut self) -> &mut [u8] {
        &mut self.labels
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn metadata_mut(&mut self) -> &mut DatasetMetadata {
        &mut self.metadata
    }

    /// The rows at `indices`, in that order. Contaminated positions are
    /// carried over; every domain must stay non-empty.
    pub fn select(&self, indices: &[usize]) -> Result<Self, DataError> {
        let n = self.len();
        if let Some(&i) = indices.iter().find(|&&i| i >= n) {
            return Err(DataError::Validation(format!(
                "row {i} out of range for {n} rows"
            )));
        }
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        let mut position = vec![usize::MAX; n];
        for (new, &old) in indices.iter().enumerate() {
            position[old] = new;
        }
        let mut contaminated: Vec<usize> = self
            .metadata
            .contaminated
            .iter()
            .map(|&i| position[i])
            .filter(|&p| p != usize::MAX)
            .collect();
        contaminated.sort_unstable();
        let ds = Self {
            name: self.name.clone(),
            dim: self.dim,
            feature_names: self.feature_names.clone(),
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            domain_names: self.domain_names.clone(),
            domain_masks: self
                .domain_masks
                .iter()
                .map(|m| indices.iter().map(|&i| m[i]).collect())
                .collect(),
            row_ids: indices.iter().map(|&i| self.row_ids[i]).collect(),
            metadata: DatasetMetadata {
                contaminated,
                generator: self.metadata.generator.clone(),
            },
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Writes the metadata sidecar as pretty-printed JSON.
    pub fn save_metadata(&self, path: &Path) -> Result<(), DataError> {
        let record = MetadataRecord {
            name: self.name.clone(),
            rows: self.len(),
            feature_names: self.feature_names.clone(),
            domain_names: self.domain_names.clone(),
            row_ids: self.row_ids.clone(),
            metadata: self.metadata.clone(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&record)? + "\n")?;
        Ok(())
    }

    /// Reads a sidecar written by [`save_metadata`](Self::save_metadata) and
    /// attaches its metadata and row ids.
    pub fn load_metadata(&mut self, path: &Path) -> Result<(), DataError> {
        let record: MetadataRecord = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if record.rows != self.len() || record.row_ids.len() != self.len() {
            return Err(DataError::Validation(format!(
                "metadata describes {} rows, dataset has {}",
                record.rows,
                self.len()
            )));
        }
        self.name = record.name;
        self.row_ids = record.row_ids;
        self.metadata = record.metadata;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MetadataRecord {
    name: String,
    rows: usize,
    feature_names: Vec<String>,
    domain_names: Vec<String>,
    row_ids: Vec<usize>,
    #[serde(flatten)]
    metadata: DatasetMetadata,
}

/// `floor(fraction * n)`, robust to representation error.
pub fn exact_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64) + 1e-9).floor() as usize
}
