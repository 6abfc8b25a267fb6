//! Instance-wise weight estimator and its policy-gradient training.

mod network;
mod reinforce;

pub use network::{estimate_weights, EstimatorArch, InputScaler, WeightEstimator, PROB_EPS};
pub use reinforce::{
    log_prob_gradient, reinforce_step, sample_selection, selection_log_prob, train_estimator, FidelityLoss,
    IterationLog, LearningCurve, ReinforceTrainer, SelectionGuard, SelectionSample, TrainConfig,
};
