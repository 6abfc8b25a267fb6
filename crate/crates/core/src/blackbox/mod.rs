//! Black-box predictors and auxiliary (distillation) datasets.

mod forest;
mod mlp;

pub use forest::{ForestConfig, RandomForest};
pub use mlp::{train_mlp, Mlp, MlpConfig};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SyntheticKind, Task, SYN_DIM};
use crate::error::{Error, Result};
use crate::numerics::{logit, Matrix};

/// Classification probabilities are clamped to `[ε, 1−ε]` before the logit.
pub const PROBABILITY_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BlackBoxModel {
    /// Ground-truth generator of a synthetic dataset.
    Oracle { generator: SyntheticKind },
    Mlp(Mlp),
    Forest(RandomForest),
    /// Fixed affine function; handy for already-fitted linear models.
    Linear {
        coefficients: Vec<f64>,
        intercept: f64,
        task: Task,
    },
}

impl BlackBoxModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            BlackBoxModel::Oracle { .. } => "oracle",
            BlackBoxModel::Mlp(_) => "mlp",
            BlackBoxModel::Forest(_) => "forest",
            BlackBoxModel::Linear { .. } => "linear",
        }
    }

    pub fn task(&self) -> Task {
        match self {
            BlackBoxModel::Oracle { .. } => Task::Regression,
            BlackBoxModel::Mlp(m) => m.task,
            BlackBoxModel::Forest(f) => f.task,
            BlackBoxModel::Linear { task, .. } => *task,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            BlackBoxModel::Oracle { .. } => SYN_DIM,
            BlackBoxModel::Mlp(m) => m.network.input_dim(),
            BlackBoxModel::Forest(f) => f.dim,
            BlackBoxModel::Linear { coefficients, .. } => coefficients.len(),
        }
    }

    /// Raw prediction: a real value for regression, the class-1 probability
    /// for classification.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "black box expects {} features, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        Ok(match self {
            BlackBoxModel::Oracle { generator } => generator.label(x),
            BlackBoxModel::Mlp(m) => m.predict(x),
            BlackBoxModel::Forest(f) => f.predict(x),
            BlackBoxModel::Linear {
                coefficients,
                intercept,
                task,
            } => {
                let z = intercept + coefficients.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                match task {
                    Task::Regression => z,
                    Task::Classification => crate::numerics::sigmoid(z),
                }
            }
        })
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.input_dim() {
            return Err(Error::invalid("feature dimension differs from the black box"));
        }
        match self {
            BlackBoxModel::Mlp(m) => Ok(m.predict_batch(x)),
            _ => x.row_iter().map(|r| self.predict(r)).collect(),
        }
    }

    /// Prediction in distillation space: regression values as-is,
    /// classification probabilities as clamped logits.
    pub fn predict_target(&self, x: &[f64]) -> Result<f64> {
        Ok(self.to_target(self.predict(x)?))
    }

    pub fn to_target(&self, raw: f64) -> f64 {
        match self.task() {
            Task::Regression => raw,
            Task::Classification => logit(raw.clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            kind: self.kind_name().into(),
            task: self.task(),
            input_dim: self.input_dim(),
            model: self.clone(),
        };
        std::fs::write(path, serde_json::to_vec(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let file: ModelFile = serde_json::from_slice(&bytes)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::invalid(format!(
                "{} is not a version-{MODEL_VERSION} black-box model file",
                path.display()
            )));
        }
        if file.model.input_dim() != file.input_dim || file.model.task() != file.task {
            return Err(Error::invalid("model file header disagrees with its body"));
        }
        Ok(file.model)
    }
}

const MODEL_FORMAT: &str = "rllim-blackbox";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    kind: String,
    task: Task,
    input_dim: usize,
    model: BlackBoxModel,
}

/// Piecewise-linear ground truth of a synthetic dataset.
pub fn oracle_predict(kind: SyntheticKind, x: &[f64]) -> Result<f64> {
    if x.len() != SYN_DIM {
        return Err(Error::invalid(format!("synthetic oracle expects {SYN_DIM} features, got {}", x.len())));
    }
    Ok(kind.label(x))
}

pub fn train_forest(train: &Dataset, config: &ForestConfig) -> Result<BlackBoxModel> {
    Ok(BlackBoxModel::Forest(RandomForest::fit(
        &train.features,
        &train.labels,
        train.task,
        config,
    )?))
}

pub fn train_mlp_model(train: &Dataset, config: &MlpConfig) -> Result<BlackBoxModel> {
    Ok(BlackBoxModel::Mlp(train_mlp(&train.features, &train.labels, train.task, config)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuxRole {
    Train,
    Probe,
}

/// Features paired with the black box's distillation targets.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryDataset {
    pub features: Matrix,
    pub targets: Vec<f64>,
    pub role: AuxRole,
}

impl AuxiliaryDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, indices: &[usize]) -> AuxiliaryDataset {
        AuxiliaryDataset {
            features: self.features.select_rows(indices),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            role: self.role,
        }
    }
}

pub fn build_auxiliary(model: &BlackBoxModel, features: &Matrix, role: AuxRole) -> Result<AuxiliaryDataset> {
    let raw = model.predict_batch(features)?;
    Ok(AuxiliaryDataset {
        features: features.clone(),
        targets: raw.into_iter().map(|p| model.to_target(p)).collect(),
        role,
    })
}
