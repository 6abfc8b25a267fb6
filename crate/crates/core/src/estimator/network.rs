use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Forward, Gradients, Network};
use crate::numerics::{sigmoid, Matrix, MinMaxScaler, RandomSource};

/// Lower/upper clamp on selection probabilities.
pub const PROB_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorArch {
    pub hidden_layers: usize,
    pub hidden_units: usize,
    /// Append `|x̃ᵖ − x̃ᵢ|` (scaled, per feature) to each input row.
    pub pair_difference: bool,
}

impl Default for EstimatorArch {
    fn default() -> Self {
        EstimatorArch {
            hidden_layers: 2,
            hidden_units: 50,
            pair_difference: true,
        }
    }
}

/// Min-max bounds for the estimator's inputs, fitted on the auxiliary
/// training set: one scaler over the features (shared by the probe and the
/// training instance) and one over the distillation target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaler {
    pub features: MinMaxScaler,
    pub target_min: f64,
    pub target_max: f64,
}

impl InputScaler {
    pub fn fit(features: &Matrix, targets: &[f64]) -> Result<Self> {
        let features = MinMaxScaler::fit(features)?;
        let target_min = targets.iter().copied().fold(f64::INFINITY, f64::min);
        let target_max = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(InputScaler {
            features,
            target_min,
            target_max,
        })
    }

    pub fn identity(dim: usize) -> Self {
        InputScaler {
            features: MinMaxScaler::identity(dim),
            target_min: 0.0,
            target_max: 1.0,
        }
    }

    fn scale_target(&self, t: f64) -> f64 {
        let range = self.target_max - self.target_min;
        if range > 0.0 {
            (t - self.target_min) / range
        } else {
            0.0
        }
    }
}

/// Instance-wise weight estimator: a tanh perceptron over
/// `(probe features, training features, training target)` with a sigmoid head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEstimator {
    pub network: Network,
    pub scaler: InputScaler,
    pub dim: usize,
    #[serde(default)]
    pub pair_difference: bool,
}

impl WeightEstimator {
    pub fn new(dim: usize, arch: &EstimatorArch, scaler: InputScaler, rng: &mut RandomSource) -> Self {
        let width = if arch.pair_difference { 3 * dim + 1 } else { 2 * dim + 1 };
        let mut sizes = vec![width];
        sizes.extend(std::iter::repeat_n(arch.hidden_units, arch.hidden_layers));
        sizes.push(1);
        WeightEstimator {
            network: Network::new(&sizes, Activation::Tanh, rng),
            scaler,
            dim,
            pair_difference: arch.pair_difference,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.network.parameter_count()
    }

    pub fn input_width(&self) -> usize {
        if self.pair_difference {
            3 * self.dim + 1
        } else {
            2 * self.dim + 1
        }
    }

    /// Scaled network input rows for one probe against a batch.
    pub fn inputs(&self, probe_x: &[f64], features: &Matrix, targets: &[f64]) -> Result<Array2<f64>> {
        if probe_x.len() != self.dim || features.cols() != self.dim {
            return Err(Error::invalid(format!(
                "estimator expects {} features, got probe {} / batch {}",
                self.dim,
                probe_x.len(),
                features.cols()
            )));
        }
        if targets.len() != features.rows() {
            return Err(Error::LengthMismatch {
                left: features.rows(),
                right: targets.len(),
            });
        }
        let width = self.input_width();
        let probe = self.scaler.features.transform_row(probe_x);
        let mut data = Vec::with_capacity(features.rows() * width);
        for (row, &t) in features.row_iter().zip(targets) {
            let start = data.len();
            data.extend_from_slice(&probe);
            data.extend(row.iter().enumerate().map(|(c, &v)| self.scaler.features.scale_value(c, v)));
            data.push(self.scaler.scale_target(t));
            if self.pair_difference {
                for c in 0..self.dim {
                    data.push((data[start + c] - data[start + self.dim + c]).abs());
                }
            }
        }
        Ok(Array2::from_shape_vec((features.rows(), width), data).expect("width matches"))
    }

    /// Raw sigmoid outputs (unclamped) for prepared input rows.
    pub(crate) fn raw_probabilities(&self, inputs: ArrayView2<'_, f64>) -> Vec<f64> {
        self.network.predict(inputs).iter().map(|&z| sigmoid(z)).collect()
    }

    pub(crate) fn forward(&self, inputs: ArrayView2<'_, f64>) -> (Forward, Vec<f64>) {
        let fwd = self.network.forward(inputs);
        let p = fwd.last().iter().map(|&z| sigmoid(z)).collect();
        (fwd, p)
    }

    pub(crate) fn backward(&self, fwd: &Forward, delta: Array2<f64>) -> Gradients {
        self.network.backward(fwd, delta)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            layer_shapes: self.network.layers.iter().map(|l| l.weights.dim()).collect(),
            estimator: self.clone(),
        };
        std::fs::write(path, serde_json::to_vec(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let file: CheckpointFile = serde_json::from_slice(&bytes)?;
        if file.format != CHECKPOINT_FORMAT || file.version != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!("{} is not an estimator checkpoint", path.display())));
        }
        let shapes: Vec<(usize, usize)> = file.estimator.network.layers.iter().map(|l| l.weights.dim()).collect();
        if shapes != file.layer_shapes {
            return Err(Error::invalid("checkpoint layer shapes disagree with the stored parameters"));
        }
        Ok(file.estimator)
    }
}

const CHECKPOINT_FORMAT: &str = "rllim-estimator";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    layer_shapes: Vec<(usize, usize)>,
    estimator: WeightEstimator,
}

/// Selection probabilities for every batch row, clamped to `[ε, 1−ε]`.
pub fn estimate_weights(
    estimator: &WeightEstimator,
    probe_x: &[f64],
    features: &Matrix,
    targets: &[f64],
) -> Result<Vec<f64>> {
    let inputs = estimator.inputs(probe_x, features, targets)?;
    Ok(estimator
        .raw_probabilities(inputs.view())
        .into_iter()
        .map(|p| p.clamp(PROB_EPS, 1.0 - PROB_EPS))
        .collect())
}
