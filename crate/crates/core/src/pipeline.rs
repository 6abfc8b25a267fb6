//! End-to-end orchestration: black box (Stage 0), auxiliary datasets (1),
//! global baseline (2), estimator training (3), and per-instance inference
//! (4), plus the λ sweep.

use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::blackbox::{
    build_auxiliary, train_forest, train_mlp_model, AuxRole, AuxiliaryDataset, BlackBoxModel, ForestConfig, MlpConfig,
};
use crate::data::Dataset;
use crate::error::{Error, Result, Stage};
use crate::estimator::{estimate_weights, train_estimator, LearningCurve, TrainConfig, WeightEstimator};
use crate::explanation::{top_indices, Explanation, Method};
use crate::interpretable::{fit_global_baseline, fit_local, BaselineModel, LocalKind};
use crate::numerics::{mean, RandomSource, Stream};

/// How Stage 0 obtains the black box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BlackBoxSpec {
    /// Ground-truth generator of a synthetic dataset; Stage 0 is skipped.
    Oracle,
    Mlp(MlpConfig),
    Forest(ForestConfig),
    /// Previously saved model file; Stage 0 is skipped.
    Pretrained { path: PathBuf },
}

pub const DEFAULT_PROBE_FRACTION: f64 = 0.1;

/// `{0.01, 0.05, 0.1, 0.5, 1, 2, 5}`
pub const DEFAULT_LAMBDA_GRID: [f64; 7] = [0.01, 0.05, 0.1, 0.5, 1.0, 2.0, 5.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Share of the training split carved out as the probe set when no
    /// explicit probe set is given.
    pub probe_fraction: f64,
    pub local_kind: LocalKind,
    pub train: TrainConfig,
    /// Keep only the `k` largest weights at inference; `None` keeps all.
    pub top_k: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            probe_fraction: DEFAULT_PROBE_FRACTION,
            local_kind: LocalKind::ridge(),
            train: TrainConfig::default(),
            top_k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub blackbox_trained: bool,
    pub train_rows: usize,
    pub probe_rows: usize,
    pub baseline_checksum_before: u64,
    pub baseline_checksum_after: u64,
}

#[derive(Debug, Clone)]
pub struct PipelineArtifacts {
    pub blackbox: BlackBoxModel,
    pub baseline: BaselineModel,
    pub estimator: WeightEstimator,
    pub aux_train: AuxiliaryDataset,
    pub aux_probe: AuxiliaryDataset,
    pub curve: LearningCurve,
    pub log: StageLog,
}

/// Splits `train` into (training, probe) with a seeded shuffle.
pub fn carve_probe(train: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "probe fraction must lie in (0, 1) when no probe set is given, got {fraction}"
        )));
    }
    let n = train.len();
    let m = ((fraction * n as f64).round() as usize).max(1);
    if n < m + 2 {
        return Err(Error::invalid(format!("{n} training rows are too few to carve out a probe set")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    RandomSource::new(seed).derive(Stream::Split).shuffle(&mut idx);
    let (probe, rest) = idx.split_at(m);
    Ok((train.subset(rest), train.subset(probe)))
}

/// Stage 0: obtains the black box. Returns the model and whether it was
/// trained here.
pub fn obtain_blackbox(train: &Dataset, spec: &BlackBoxSpec) -> Result<(BlackBoxModel, bool)> {
    let staged = |e: Error| e.in_stage(Stage::BlackBox);
    match spec {
        BlackBoxSpec::Oracle => {
            let generator = train
                .synthetic
                .ok_or_else(|| staged(Error::Config("the oracle black box needs a synthetic dataset".into())))?;
            Ok((BlackBoxModel::Oracle { generator }, false))
        }
        BlackBoxSpec::Mlp(cfg) => Ok((train_mlp_model(train, cfg).map_err(staged)?, true)),
        BlackBoxSpec::Forest(cfg) => Ok((train_forest(train, cfg).map_err(staged)?, true)),
        BlackBoxSpec::Pretrained { path } => {
            let model = BlackBoxModel::load(path).map_err(staged)?;
            if model.input_dim() != train.dim() {
                return Err(staged(Error::invalid(format!(
                    "pretrained model expects {} features, data has {}",
                    model.input_dim(),
                    train.dim()
                ))));
            }
            Ok((model, false))
        }
    }
}

/// Stages 0–3. Without an explicit `probe` set, a `probe_fraction` share of
/// `train` is held out for the reward (the black box still sees all of
/// `train`).
pub fn run_pipeline(
    train: &Dataset,
    probe: Option<&Dataset>,
    blackbox: &BlackBoxSpec,
    config: &PipelineConfig,
) -> Result<PipelineArtifacts> {
    let (model, trained) = obtain_blackbox(train, blackbox)?;
    let mut artifacts = run_with_blackbox(train, probe, model, config)?;
    artifacts.log.blackbox_trained = trained;
    Ok(artifacts)
}

/// Stages 1–3 around a given black box.
pub fn run_with_blackbox(
    train: &Dataset,
    probe: Option<&Dataset>,
    model: BlackBoxModel,
    config: &PipelineConfig,
) -> Result<PipelineArtifacts> {
    let (fit_part, probe_part) = match probe {
        Some(p) => (train.clone(), p.clone()),
        None => carve_probe(train, config.probe_fraction, config.train.seed)?,
    };
    if fit_part.dim() != probe_part.dim() {
        return Err(Error::invalid("training and probe sets differ in dimension"));
    }
    let aux = |d: &Dataset, role| build_auxiliary(&model, &d.features, role).map_err(|e| e.in_stage(Stage::Auxiliary));
    let aux_train = aux(&fit_part, AuxRole::Train)?;
    let aux_probe = aux(&probe_part, AuxRole::Probe)?;
    let baseline = fit_global_baseline(&aux_train, config.local_kind).map_err(|e| e.in_stage(Stage::Baseline))?;
    let before = baseline.checksum();
    let (estimator, curve) = train_estimator(&aux_train, &aux_probe, &baseline, config.local_kind, &config.train)
        .map_err(|e| e.in_stage(Stage::Estimator))?;
    let after = baseline.checksum();
    Ok(PipelineArtifacts {
        log: StageLog {
            blackbox_trained: false,
            train_rows: aux_train.len(),
            probe_rows: aux_probe.len(),
            baseline_checksum_before: before,
            baseline_checksum_after: after,
        },
        blackbox: model,
        baseline,
        estimator,
        aux_train,
        aux_probe,
        curve,
    })
}

/// Zeroes all but the `k` largest weights.
pub fn truncate_top_k(weights: &mut [f64], k: usize) {
    if k >= weights.len() {
        return;
    }
    let mut keep = vec![false; weights.len()];
    for i in top_indices(weights, k) {
        keep[i] = true;
    }
    for (w, k) in weights.iter_mut().zip(keep) {
        if !k {
            *w = 0.0;
        }
    }
}

/// Stage 4: weights straight from the estimator (no sampling), then a
/// weighted fit of the surrogate.
pub fn explain_instance(
    instance_id: usize,
    x_t: &[f64],
    estimator: &WeightEstimator,
    aux_train: &AuxiliaryDataset,
    model: &BlackBoxModel,
    local_kind: LocalKind,
    top_k: Option<usize>,
) -> Result<Explanation> {
    let staged = |e: Error| e.in_stage(Stage::Inference);
    let mut weights = estimate_weights(estimator, x_t, &aux_train.features, &aux_train.targets).map_err(staged)?;
    if let Some(k) = top_k {
        if k == 0 {
            return Err(staged(Error::Config("top-k must be at least 1".into())));
        }
        truncate_top_k(&mut weights, k);
    }
    let local = fit_local(aux_train, &weights, local_kind).map_err(staged)?;
    let target = model.predict_target(x_t).map_err(staged)?;
    Ok(Explanation::new(instance_id, Method::RlLim, x_t, weights, local, target))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweepRow {
    pub lambda: f64,
    pub validation_lmae: f64,
    pub mean_selection_probability: f64,
    pub chosen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweepResult {
    pub rows: Vec<LambdaSweepRow>,
}

impl LambdaSweepResult {
    pub fn chosen(&self) -> &LambdaSweepRow {
        self.rows.iter().find(|r| r.chosen).expect("exactly one λ is chosen")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda", "validation_lmae", "mean_selection_probability", "chosen"])?;
        for r in &self.rows {
            w.write_record([
                r.lambda.to_string(),
                r.validation_lmae.to_string(),
                r.mean_selection_probability.to_string(),
                r.chosen.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Probe-set fidelity of a trained estimator: mean |local − black box| and
/// the mean selection probability over probe points.
pub fn validate_estimator(
    estimator: &WeightEstimator,
    aux_train: &AuxiliaryDataset,
    aux_probe: &AuxiliaryDataset,
    local_kind: LocalKind,
) -> Result<(f64, f64)> {
    let mut err = Vec::with_capacity(aux_probe.len());
    let mut prob = Vec::with_capacity(aux_probe.len());
    for (x, &t) in aux_probe.features.row_iter().zip(&aux_probe.targets) {
        let w = estimate_weights(estimator, x, &aux_train.features, &aux_train.targets)?;
        prob.push(mean(&w));
        err.push((fit_local(aux_train, &w, local_kind)?.predict(x) - t).abs());
    }
    Ok((mean(&err), mean(&prob)))
}

/// Trains one estimator per λ with everything else fixed (the black box,
/// auxiliary sets and baseline are built once) and marks the λ with the
/// lowest probe-set LMAE; ties go to the earlier grid entry.
pub fn sweep_lambda(
    grid: &[f64],
    train: &Dataset,
    probe: Option<&Dataset>,
    blackbox: &BlackBoxSpec,
    config: &PipelineConfig,
) -> Result<LambdaSweepResult> {
    if grid.is_empty() {
        return Err(Error::Config("λ grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::Config(format!("λ must be nonnegative, got {bad}")));
    }
    let (model, _) = obtain_blackbox(train, blackbox)?;
    let (fit_part, probe_part) = match probe {
        Some(p) => (train.clone(), p.clone()),
        None => carve_probe(train, config.probe_fraction, config.train.seed)?,
    };
    let aux_train = build_auxiliary(&model, &fit_part.features, AuxRole::Train).map_err(|e| e.in_stage(Stage::Auxiliary))?;
    let aux_probe = build_auxiliary(&model, &probe_part.features, AuxRole::Probe).map_err(|e| e.in_stage(Stage::Auxiliary))?;
    let baseline = fit_global_baseline(&aux_train, config.local_kind).map_err(|e| e.in_stage(Stage::Baseline))?;
    let mut rows = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let tc = TrainConfig {
            lambda,
            ..config.train.clone()
        };
        let (est, _) = train_estimator(&aux_train, &aux_probe, &baseline, config.local_kind, &tc)
            .map_err(|e| e.in_stage(Stage::Estimator))?;
        let (lmae, prob) = validate_estimator(&est, &aux_train, &aux_probe, config.local_kind)?;
        rows.push(LambdaSweepRow {
            lambda,
            validation_lmae: lmae,
            mean_selection_probability: prob,
            chosen: false,
        });
    }
    let best = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.validation_lmae.total_cmp(&b.1.validation_lmae).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("nonempty grid");
    rows[best].chosen = true;
    Ok(LambdaSweepResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_syn, SyntheticKind};
    use crate::estimator::EstimatorArch;

    fn quick_config(iterations: usize) -> PipelineConfig {
        PipelineConfig {
            train: TrainConfig {
                iterations,
                probe_batch: 4,
                train_batch: 64,
                arch: EstimatorArch {
                    hidden_layers: 1,
                    hidden_units: 8,
                    pair_difference: true,
                },
                ..TrainConfig::default()
            },
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn oracle_skips_stage_zero() {
        let data = gen_syn(SyntheticKind::Syn1, 120, 1);
        let art = run_pipeline(&data, None, &BlackBoxSpec::Oracle, &quick_config(3)).unwrap();
        assert!(!art.log.blackbox_trained);
        assert_eq!(art.log.probe_rows, 12);
        assert_eq!(art.log.train_rows, 108);
        for (x, t) in art.aux_train.features.row_iter().zip(&art.aux_train.targets) {
            assert_eq!(*t, SyntheticKind::Syn1.label(x));
        }
        assert_eq!(art.log.baseline_checksum_before, art.log.baseline_checksum_after);
    }

    #[test]
    fn zero_probe_fraction_is_config_error() {
        let data = gen_syn(SyntheticKind::Syn1, 50, 1);
        let cfg = PipelineConfig {
            probe_fraction: 0.0,
            ..quick_config(1)
        };
        assert!(matches!(
            run_pipeline(&data, None, &BlackBoxSpec::Oracle, &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn oracle_needs_synthetic_data() {
        let mut data = gen_syn(SyntheticKind::Syn1, 50, 1);
        data.synthetic = None;
        let err = run_pipeline(&data, None, &BlackBoxSpec::Oracle, &quick_config(1)).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: Stage::BlackBox, .. }), "{err}");
    }

    #[test]
    fn reruns_are_identical() {
        let data = gen_syn(SyntheticKind::Syn2, 100, 2);
        let a = run_pipeline(&data, None, &BlackBoxSpec::Oracle, &quick_config(5)).unwrap();
        let b = run_pipeline(&data, None, &BlackBoxSpec::Oracle, &quick_config(5)).unwrap();
        assert_eq!(a.estimator, b.estimator);
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.baseline, b.baseline);
    }

    #[test]
    fn explanation_is_deterministic_and_consistent() {
        let data = gen_syn(SyntheticKind::Syn1, 100, 3);
        let art = run_pipeline(&data, None, &BlackBoxSpec::Oracle, &quick_config(2)).unwrap();
        let x = data.features.row(0);
        let kind = LocalKind::ridge();
        let e1 = explain_instance(0, x, &art.estimator, &art.aux_train, &art.blackbox, kind, None).unwrap();
        let e2 = explain_instance(0, x, &art.estimator, &art.aux_train, &art.blackbox, kind, None).unwrap();
        assert_eq!(e1, e2);
        assert_eq!(e1.local_prediction, e1.model.predict(x));
        let n = art.aux_train.len();
        let full = explain_instance(0, x, &art.estimator, &art.aux_train, &art.blackbox, kind, Some(n)).unwrap();
        assert_eq!(full, e1);
        let top = explain_instance(0, x, &art.estimator, &art.aux_train, &art.blackbox, kind, Some(5)).unwrap();
        assert_eq!(top.weights.iter().filter(|w| **w > 0.0).count(), 5);
    }

    #[test]
    fn truncation_keeps_largest() {
        let mut w = vec![0.1, 0.5, 0.3, 0.5];
        truncate_top_k(&mut w, 2);
        assert_eq!(w, vec![0.0, 0.5, 0.0, 0.5]);
    }

    #[test]
    fn single_lambda_is_chosen() {
        let data = gen_syn(SyntheticKind::Syn1, 80, 4);
        let r = sweep_lambda(&[0.3], &data, None, &BlackBoxSpec::Oracle, &quick_config(2)).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert!(r.chosen().chosen);
        assert!(sweep_lambda(&[], &data, None, &BlackBoxSpec::Oracle, &quick_config(2)).is_err());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("lambda,validation_lmae,mean_selection_probability,chosen\n0.3,"));
    }
}
