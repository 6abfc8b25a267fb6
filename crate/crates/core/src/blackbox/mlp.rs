use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{check_same_len, Error, Result};
use crate::nn::{Activation, Adam, Network};
use crate::numerics::{sigmoid, Matrix, RandomSource, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    /// Hidden widths as fractions of the input dimension: d, d/2, d/4, d/8.
    pub width_divisors: Vec<usize>,
    /// Lower bound on every hidden width.
    pub min_width: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Trailing fraction of the training rows held out for early stopping.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            width_divisors: vec![1, 2, 4, 8],
            min_width: 8,
            learning_rate: 1e-3,
            batch_size: 256,
            max_epochs: 200,
            patience: 10,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

/// ReLU multilayer perceptron. Regression targets are standardised internally;
/// classification uses a sigmoid head trained on cross-entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub network: Network,
    pub task: Task,
    pub target_mean: f64,
    pub target_scale: f64,
    pub epochs_trained: usize,
}

impl Mlp {
    pub fn init(dim: usize, task: Task, config: &MlpConfig) -> Self {
        let mut sizes = vec![dim];
        sizes.extend(config.width_divisors.iter().map(|&k| (dim / k.max(1)).max(config.min_width).max(1)));
        sizes.push(1);
        let mut rng = RandomSource::new(config.seed).derive(Stream::Init);
        Mlp {
            network: Network::new(&sizes, Activation::Relu, &mut rng),
            task,
            target_mean: 0.0,
            target_scale: 1.0,
            epochs_trained: 0,
        }
    }

    fn output(&self, z: f64) -> f64 {
        match self.task {
            Task::Regression => self.target_mean + self.target_scale * z,
            Task::Classification => sigmoid(z),
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        self.output(self.network.predict(view)[[0, 0]])
    }

    pub fn predict_batch(&self, x: &Matrix) -> Vec<f64> {
        self.network.predict(x.view()).iter().map(|&z| self.output(z)).collect()
    }

    /// Mean training loss on `(x, y)` in the internal target space.
    fn loss(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> f64 {
        let z = self.network.predict(x);
        let n = y.len() as f64;
        match self.task {
            Task::Regression => z.iter().zip(y).map(|(z, t)| (z - t).powi(2)).sum::<f64>() / n,
            Task::Classification => {
                z.iter()
                    .zip(y)
                    .map(|(&z, &t)| {
                        // log(1 + e^z) − t·z, stable form
                        z.max(0.0) - t * z + (-z.abs()).exp().ln_1p()
                    })
                    .sum::<f64>()
                    / n
            }
        }
    }
}

pub fn train_mlp(x: &Matrix, y: &[f64], task: Task, config: &MlpConfig) -> Result<Mlp> {
    check_same_len(x.rows(), y.len())?;
    if x.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    let mut model = Mlp::init(x.cols(), task, config);
    if config.max_epochs == 0 {
        return Ok(model);
    }
    let n = x.rows();
    let n_val = if n >= 10 {
        ((n as f64 * config.validation_fraction).round() as usize).clamp(1, n - 1)
    } else {
        0
    };
    let n_fit = n - n_val;

    let targets: Vec<f64> = match task {
        Task::Regression => {
            let mean = y[..n_fit].iter().sum::<f64>() / n_fit as f64;
            let var = y[..n_fit].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n_fit as f64;
            model.target_mean = mean;
            model.target_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
            y.iter().map(|v| (v - mean) / model.target_scale).collect()
        }
        Task::Classification => y.to_vec(),
    };
    let xs = x.view();
    let x_val = xs.slice(ndarray::s![n_fit.., ..]);
    let y_val = &targets[n_fit..];

    let mut opt = Adam::new(&model.network, config.learning_rate);
    let mut rng = RandomSource::new(config.seed).derive(Stream::Batch);
    let mut order: Vec<usize> = (0..n_fit).collect();
    let mut best = model.clone();
    let mut best_loss = if n_val > 0 { model.loss(x_val, y_val) } else { f64::INFINITY };
    let mut stale = 0;
    let batch = config.batch_size.max(1);

    for epoch in 0..config.max_epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(batch) {
            let bx = xs.select(ndarray::Axis(0), chunk);
            let fwd = model.network.forward(bx.view());
            let z = fwd.last();
            let m = chunk.len() as f64;
            let delta = Array2::from_shape_fn((chunk.len(), 1), |(r, _)| {
                let t = targets[chunk[r]];
                match task {
                    Task::Regression => 2.0 * (z[[r, 0]] - t) / m,
                    Task::Classification => (sigmoid(z[[r, 0]]) - t) / m,
                }
            });
            let grads = model.network.backward(&fwd, delta);
            if !grads.is_finite() {
                return Err(diverged(best, epoch));
            }
            opt.step(&mut model.network, &grads);
        }
        model.epochs_trained = epoch + 1;
        let fit_loss = model.loss(xs.slice(ndarray::s![..n_fit, ..]), &targets[..n_fit]);
        if !fit_loss.is_finite() || !model.network.is_finite() {
            return Err(diverged(best, epoch));
        }
        if n_val == 0 {
            best = model.clone();
            continue;
        }
        let val_loss = model.loss(x_val, y_val);
        if val_loss < best_loss {
            best_loss = val_loss;
            best = model.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    Ok(best)
}

fn diverged(checkpoint: Mlp, epoch: usize) -> Error {
    Error::Diverged {
        message: format!("non-finite MLP loss in epoch {epoch}"),
        checkpoint: Some(Box::new(super::BlackBoxModel::Mlp(checkpoint))),
    }
}
