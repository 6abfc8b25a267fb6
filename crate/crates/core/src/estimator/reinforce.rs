//! Bernoulli instance selection and the REINFORCE update of the weight estimator.

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::network::{EstimatorArch, InputScaler, WeightEstimator, PROB_EPS};
use crate::blackbox::AuxiliaryDataset;
use crate::error::{Error, Result};
use crate::interpretable::{fit_local, BaselineModel, LocalKind};
use crate::nn::{Adam, Gradients};
use crate::numerics::{RandomSource, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidelityLoss {
    Absolute,
    Squared,
}

impl FidelityLoss {
    pub fn eval(self, target: f64, prediction: f64) -> f64 {
        match self {
            FidelityLoss::Absolute => (target - prediction).abs(),
            FidelityLoss::Squared => (target - prediction).powi(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Penalty on the fraction of selected training instances.
    pub lambda: f64,
    pub learning_rate: f64,
    pub probe_batch: usize,
    /// Upper bound on the training instances drawn per iteration.
    pub train_batch: usize,
    pub iterations: usize,
    pub seed: u64,
    pub fidelity_loss: FidelityLoss,
    pub arch: EstimatorArch,
    pub selection_guard: Option<SelectionGuard>,
}

/// Hinge penalty `strength · B · max(0, mean(w) − high, low − mean(w))` per
/// probe, keeping the mean selection probability inside `[low, high]`.
/// Without it the policy can drift into the all-off or all-on corner, where
/// the score function vanishes and training stalls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionGuard {
    pub low: f64,
    pub high: f64,
    pub strength: f64,
}

impl Default for SelectionGuard {
    fn default() -> Self {
        SelectionGuard { low: 0.1, high: 0.9, strength: 1.0 }
    }
}

impl SelectionGuard {
    /// Sign of the hinge slope at mean probability `mean`.
    fn direction(&self, mean: f64) -> f64 {
        if mean > self.high {
            1.0
        } else if mean < self.low {
            -1.0
        } else {
            0.0
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.5,
            learning_rate: 3e-3,
            probe_batch: 32,
            train_batch: 256,
            iterations: 6000,
            seed: 0,
            fidelity_loss: FidelityLoss::Absolute,
            arch: EstimatorArch::default(),
            selection_guard: Some(SelectionGuard::default()),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::Config(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.probe_batch == 0 || self.train_batch < 2 {
            return Err(Error::Config("probe batch must be ≥ 1 and training batch ≥ 2".into()));
        }
        if let Some(g) = &self.selection_guard {
            let ordered = 0.0 <= g.low && g.low < g.high && g.high <= 1.0;
            if !ordered || !g.strength.is_finite() || g.strength < 0.0 {
                return Err(Error::Config("selection guard needs 0 ≤ low < high ≤ 1 and a nonnegative strength".into()));
            }
        }
        if self.arch.hidden_units == 0 {
            return Err(Error::Config("estimator needs at least one hidden unit".into()));
        }
        Ok(())
    }
}

/// One Bernoulli draw of the selection vector for a probe instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionSample {
    pub probabilities: Vec<f64>,
    pub selection: Vec<bool>,
    pub log_prob: f64,
    /// `(1/B) Σ cᵢ`
    pub selected_fraction: f64,
}

impl SelectionSample {
    pub fn selected_count(&self) -> usize {
        self.selection.iter().filter(|c| **c).count()
    }
}

/// `Σ cᵢ ln wᵢ + (1−cᵢ) ln(1−wᵢ)`
pub fn selection_log_prob(w: &[f64], c: &[bool]) -> f64 {
    w.iter()
        .zip(c)
        .map(|(&p, &ci)| if ci { p.ln() } else { (1.0 - p).ln() })
        .sum()
}

pub fn sample_selection(w: &[f64], rng: &mut RandomSource) -> SelectionSample {
    let selection: Vec<bool> = w.iter().map(|&p| rng.uniform() < p).collect();
    let count = selection.iter().filter(|c| **c).count();
    SelectionSample {
        log_prob: selection_log_prob(w, &selection),
        selected_fraction: if w.is_empty() { 0.0 } else { count as f64 / w.len() as f64 },
        probabilities: w.to_vec(),
        selection,
    }
}

/// ∇φ ln ρφ(c) for one probe against a batch, with the selection fixed.
pub fn log_prob_gradient(
    estimator: &WeightEstimator,
    probe_x: &[f64],
    batch: &AuxiliaryDataset,
    selection: &[bool],
) -> Result<Gradients> {
    let inputs = estimator.inputs(probe_x, &batch.features, &batch.targets)?;
    let (fwd, raw) = estimator.forward(inputs.view());
    let delta = score_delta(&raw, selection, 1.0);
    Ok(estimator.backward(&fwd, delta))
}

/// `scale · ∂ ln ρ / ∂z` per row; zero where the clamp is active.
pub(crate) fn score_delta(raw: &[f64], selection: &[bool], scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((raw.len(), 1), |(i, _)| {
        let p = raw[i];
        if !(PROB_EPS..=1.0 - PROB_EPS).contains(&p) {
            return 0.0;
        }
        let c = if selection[i] { 1.0 } else { 0.0 };
        scale * (c - p)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    /// Mean over probes of baseline loss minus surrogate loss.
    pub mean_reward: f64,
    pub mean_selection_probability: f64,
    pub mean_selected_fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub iterations: Vec<IterationLog>,
}

impl LearningCurve {
    pub fn rewards(&self) -> Vec<f64> {
        self.iterations.iter().map(|l| l.mean_reward).collect()
    }

    /// Mean reward over the first and last quarter of iterations.
    pub fn quartile_rewards(&self) -> (f64, f64) {
        let r = self.rewards();
        let q = (r.len() / 4).max(1);
        let first = crate::numerics::mean(&r[..q.min(r.len())]);
        let last = crate::numerics::mean(&r[r.len().saturating_sub(q)..]);
        (first, last)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "mean_reward", "mean_selection_probability", "mean_selected_fraction"])?;
        for l in &self.iterations {
            w.write_record([
                l.iteration.to_string(),
                l.mean_reward.to_string(),
                l.mean_selection_probability.to_string(),
                l.mean_selected_fraction.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Policy-gradient estimate over a probe batch. `local_predict` fits the
/// surrogate on the training batch with the given instance weights and returns
/// its prediction at the probe point.
#[allow(clippy::too_many_arguments)]
pub(crate) fn reinforce_gradient_with<F>(
    estimator: &WeightEstimator,
    probes: &AuxiliaryDataset,
    baseline_losses: &[f64],
    train: &AuxiliaryDataset,
    config: &TrainConfig,
    rng: &mut RandomSource,
    mut local_predict: F,
) -> Result<(Gradients, IterationLog)>
where
    F: FnMut(&AuxiliaryDataset, &[f64], &[f64]) -> Result<f64>,
{
    let m = probes.len();
    let mut grads = Gradients::zeros_like(&estimator.network);
    let (mut reward, mut prob, mut frac) = (0.0, 0.0, 0.0);
    for j in 0..m {
        let xp = probes.features.row(j);
        let inputs = estimator.inputs(xp, &train.features, &train.targets)?;
        let (fwd, raw) = estimator.forward(inputs.view());
        let w: Vec<f64> = raw.iter().map(|p| p.clamp(PROB_EPS, 1.0 - PROB_EPS)).collect();
        let sample = sample_selection(&w, rng);
        // Fewer than two picks: fall back to the continuous weights for the fit.
        let fit_weights: Vec<f64> = if sample.selected_count() >= 2 {
            sample.selection.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect()
        } else {
            w.clone()
        };
        let pred = local_predict(train, &fit_weights, xp)?;
        let fidelity = config.fidelity_loss.eval(probes.targets[j], pred);
        let advantage = fidelity - baseline_losses[j] + config.lambda * sample.selected_fraction;
        if !advantage.is_finite() {
            return Err(Error::diverged("non-finite advantage"));
        }
        let mean_w = crate::numerics::mean(&w);
        let guard = config.selection_guard.map(|g| g.strength * g.direction(mean_w)).unwrap_or(0.0);
        if advantage != 0.0 || guard != 0.0 {
            let mut delta = score_delta(&raw, &sample.selection, advantage / m as f64);
            if guard != 0.0 {
                // hinge on Σ wᵢ; ∂wᵢ/∂zᵢ = wᵢ(1−wᵢ)
                let scale = guard / m as f64;
                for (d, &p) in delta.iter_mut().zip(&w) {
                    *d += scale * p * (1.0 - p);
                }
            }
            grads.add_assign(&estimator.backward(&fwd, delta));
        }
        reward += baseline_losses[j] - fidelity;
        prob += mean_w;
        frac += sample.selected_fraction;
    }
    if !grads.is_finite() {
        return Err(Error::diverged("non-finite policy gradient"));
    }
    let mf = m as f64;
    Ok((
        grads,
        IterationLog {
            iteration: 0,
            mean_reward: reward / mf,
            mean_selection_probability: prob / mf,
            mean_selected_fraction: frac / mf,
        },
    ))
}

/// Owns the estimator and its optimiser state during training.
#[derive(Debug, Clone)]
pub struct ReinforceTrainer {
    pub estimator: WeightEstimator,
    optimizer: Adam,
    config: TrainConfig,
    sampling_rng: RandomSource,
    iteration: usize,
}

impl ReinforceTrainer {
    pub fn new(estimator: WeightEstimator, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let optimizer = Adam::new(&estimator.network, config.learning_rate);
        let sampling_rng = RandomSource::new(config.seed).derive(Stream::Sampling);
        Ok(ReinforceTrainer {
            estimator,
            optimizer,
            config,
            sampling_rng,
            iteration: 0,
        })
    }

    /// Fresh estimator with input bounds taken from the auxiliary training set.
    pub fn for_data(aux_train: &AuxiliaryDataset, config: TrainConfig) -> Result<Self> {
        let scaler = InputScaler::fit(&aux_train.features, &aux_train.targets)?;
        let mut rng = RandomSource::new(config.seed).derive(Stream::Init);
        let est = WeightEstimator::new(aux_train.dim(), &config.arch, scaler, &mut rng);
        Self::new(est, config)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// One policy-gradient update on a probe batch and a training batch.
    pub fn step(
        &mut self,
        probes: &AuxiliaryDataset,
        train: &AuxiliaryDataset,
        baseline: &BaselineModel,
        local_kind: LocalKind,
    ) -> Result<IterationLog> {
        let loss = self.config.fidelity_loss;
        let baseline_losses: Vec<f64> = probes
            .features
            .row_iter()
            .zip(&probes.targets)
            .map(|(x, &t)| loss.eval(t, baseline.predict(x)))
            .collect();
        self.step_with(probes, &baseline_losses, train, |batch, w, xp| {
            Ok(fit_local(batch, w, local_kind)?.predict(xp))
        })
    }

    pub(crate) fn step_with<F>(
        &mut self,
        probes: &AuxiliaryDataset,
        baseline_losses: &[f64],
        train: &AuxiliaryDataset,
        local_predict: F,
    ) -> Result<IterationLog>
    where
        F: FnMut(&AuxiliaryDataset, &[f64], &[f64]) -> Result<f64>,
    {
        let (grads, mut log) = reinforce_gradient_with(
            &self.estimator,
            probes,
            baseline_losses,
            train,
            &self.config,
            &mut self.sampling_rng,
            local_predict,
        )?;
        self.optimizer.step(&mut self.estimator.network, &grads);
        if !self.estimator.network.is_finite() {
            return Err(Error::diverged("non-finite estimator parameters"));
        }
        log.iteration = self.iteration;
        self.iteration += 1;
        Ok(log)
    }
}

/// Functional form of a single update: returns the updated estimator and the
/// iteration log. The optimiser state lives in `trainer`.
pub fn reinforce_step(
    trainer: &mut ReinforceTrainer,
    probe_batch: &AuxiliaryDataset,
    train_batch: &AuxiliaryDataset,
    baseline: &BaselineModel,
    local_kind: LocalKind,
) -> Result<(WeightEstimator, IterationLog)> {
    let log = trainer.step(probe_batch, train_batch, baseline, local_kind)?;
    Ok((trainer.estimator.clone(), log))
}

/// Runs the configured number of iterations, resampling both mini-batches
/// every iteration.
pub fn train_estimator(
    aux_train: &AuxiliaryDataset,
    aux_probe: &AuxiliaryDataset,
    baseline: &BaselineModel,
    local_kind: LocalKind,
    config: &TrainConfig,
) -> Result<(WeightEstimator, LearningCurve)> {
    let trainer = ReinforceTrainer::for_data(aux_train, config.clone())?;
    train_with_trainer(trainer, aux_train, aux_probe, baseline, local_kind)
}

pub(crate) fn train_with_trainer(
    mut trainer: ReinforceTrainer,
    aux_train: &AuxiliaryDataset,
    aux_probe: &AuxiliaryDataset,
    baseline: &BaselineModel,
    local_kind: LocalKind,
) -> Result<(WeightEstimator, LearningCurve)> {
    if aux_train.len() < 2 || aux_probe.is_empty() {
        return Err(Error::invalid("estimator training needs ≥ 2 training rows and a nonempty probe set"));
    }
    if aux_train.dim() != aux_probe.dim() {
        return Err(Error::invalid("probe and training features differ in dimension"));
    }
    let config = trainer.config.clone();
    let mut batch_rng = RandomSource::new(config.seed).derive(Stream::Batch);
    let probe_n = config.probe_batch.min(aux_probe.len());
    let train_n = config.train_batch.min(aux_train.len());
    let mut curve = LearningCurve::default();
    for _ in 0..config.iterations {
        let pi = batch_rng.sample_indices(aux_probe.len(), probe_n);
        let ti = batch_rng.sample_indices(aux_train.len(), train_n);
        let log = trainer.step(&aux_probe.subset(&pi), &aux_train.subset(&ti), baseline, local_kind)?;
        curve.iterations.push(log);
    }
    Ok((trainer.estimator, curve))
}
