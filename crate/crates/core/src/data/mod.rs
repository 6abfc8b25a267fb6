//! Datasets: synthetic generators, CSV ingestion and seeded splitting.

mod synthetic;
mod tabular;

pub use synthetic::{gen_syn, SyntheticKind, SYN_DIM};
pub use tabular::{load_csv, ColumnRole, ColumnSpec, RawTable, Schema, TabularEncoder};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RandomSource, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    /// Real targets, or 0/1 for classification.
    pub labels: Vec<f64>,
    pub feature_names: Vec<String>,
    pub task: Task,
    /// Set for generated data; exposes the true local coefficients.
    pub synthetic: Option<SyntheticKind>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<f64>, feature_names: Vec<String>, task: Task) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: features.rows(),
                right: labels.len(),
            });
        }
        if feature_names.len() != features.cols() {
            return Err(Error::invalid("feature name count differs from column count"));
        }
        Ok(Dataset {
            features,
            labels,
            feature_names,
            task,
            synthetic: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            task: self.task,
            synthetic: self.synthetic,
        }
    }

    /// First `n` rows.
    pub fn head(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    pub fn true_coefficients(&self, row: usize) -> Option<Vec<f64>> {
        self.synthetic.map(|k| k.true_coefficients(self.features.row(row)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub probe: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.probe, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f <= 0.0) {
            return Err(Error::Config("split fractions must be positive".into()));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("split fractions must sum to 1".into()));
        }
        Ok(())
    }

    /// Disjoint (train, probe, test) index sets over `0..n` from a seeded shuffle.
    pub fn indices(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
        self.validate()?;
        if n < 3 {
            return Err(Error::invalid("splitting needs at least 3 rows"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        RandomSource::new(self.seed).derive(Stream::Split).shuffle(&mut order);
        let n_probe = ((self.probe * n as f64).round() as usize).max(1);
        let n_test = ((self.test * n as f64).round() as usize).max(1);
        let n_train = n.checked_sub(n_probe + n_test).filter(|&t| t > 0).ok_or_else(|| {
            Error::invalid("split leaves no training rows")
        })?;
        let train = order[..n_train].to_vec();
        let probe = order[n_train..n_train + n_probe].to_vec();
        let test = order[n_train + n_probe..].to_vec();
        Ok((train, probe, test))
    }
}

/// Seeded train/probe/test partition.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let (tr, pr, te) = spec.indices(dataset.len())?;
    Ok((dataset.subset(&tr), dataset.subset(&pr), dataset.subset(&te)))
}
