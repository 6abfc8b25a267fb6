//! One function per subcommand. Each writes into a staging directory and
//! promotes it on success.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;

use rllim::baselines::{
    default_k_grid, fit_neighborhood_forest, lime_explain, maple_explain, neighborhood_forest_config, silo_explain,
    SiloIndex,
};
use rllim::bench::{run_synth_bench, OrderingSummary};
use rllim::blackbox::{build_auxiliary, AuxRole, AuxiliaryDataset, BlackBoxModel, RandomForest};
use rllim::data::{Dataset, Task};
use rllim::estimator::WeightEstimator;
use rllim::explanation::{write_explanations_csv, Explanation, Method};
use rllim::metrics::{apr, awd_with_norm, decile_bucket_awd, lmae, mae, r2_score, AwdPoint, MetricsReport};
use rllim::numerics::{Matrix, MinMaxScaler};
use rllim::pipeline::{explain_instance, run_pipeline, sweep_lambda, LambdaSweepResult};

use crate::config::ExperimentConfig;
use crate::data::{load_splits, read_feature_rows, Splits};
use crate::output::Staging;

pub const CONFIG_FILE: &str = "config.json";
pub const ESTIMATOR_FILE: &str = "estimator.json";
pub const BLACKBOX_FILE: &str = "blackbox.json";

fn check(config: &ExperimentConfig) -> anyhow::Result<()> {
    let problems = config.validate();
    if problems.is_empty() {
        return Ok(());
    }
    bail!("invalid configuration:\n  - {}", problems.join("\n  - "))
}

fn stage(config: &ExperimentConfig, out: &Path) -> anyhow::Result<Staging> {
    check(config)?;
    let s = Staging::new(out)?;
    s.write(CONFIG_FILE, config.to_json()?)?;
    Ok(s)
}

fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn synth_bench(config: &ExperimentConfig, out: &Path) -> anyhow::Result<OrderingSummary> {
    let bench = config
        .synth_bench()
        .context("synth-bench needs a synthetic dataset (dataset.source = \"synthetic\")")?;
    let problems = bench.validate();
    if !problems.is_empty() {
        bail!("invalid configuration:\n  - {}", problems.join("\n  - "));
    }
    let staging = stage(config, out)?;
    let result = run_synth_bench(&bench)?;
    result.write_deciles_csv(staging.create("deciles.csv")?)?;
    for (r, curve) in result.curves.iter().enumerate() {
        curve.write_csv(staging.create(&format!("curves/run_{r}.csv"))?)?;
    }
    staging.write("summary.json", to_json(&result.summary)?)?;
    staging.commit()?;
    Ok(result.summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub train_rows: usize,
    pub probe_rows: usize,
    pub blackbox_trained: bool,
    pub final_quartile_reward: f64,
}

pub fn train(config: &ExperimentConfig, out: &Path) -> anyhow::Result<TrainSummary> {
    let staging = stage(config, out)?;
    let splits = load_splits(config)?;
    let art = run_pipeline(&splits.train, Some(&splits.probe), &config.blackbox, &config.seeded_pipeline())?;
    art.blackbox.save(&staging.path(BLACKBOX_FILE))?;
    art.estimator.save(&staging.path(ESTIMATOR_FILE))?;
    art.curve.write_csv(staging.create("learning_curve.csv")?)?;
    staging.write("stage_log.json", to_json(&art.log)?)?;
    staging.commit()?;
    Ok(TrainSummary {
        train_rows: art.log.train_rows,
        probe_rows: art.log.probe_rows,
        blackbox_trained: art.log.blackbox_trained,
        final_quartile_reward: art.curve.quartile_rewards().1,
    })
}

/// Everything needed to explain rows with any method.
pub struct Explainer {
    pub splits: Splits,
    pub model: BlackBoxModel,
    pub estimator: WeightEstimator,
    pub aux_train: AuxiliaryDataset,
    pub aux_probe: AuxiliaryDataset,
    forest: Option<RandomForest>,
    scaler: MinMaxScaler,
}

impl Explainer {
    fn new(config: &ExperimentConfig, splits: Splits, model: BlackBoxModel, estimator: WeightEstimator) -> anyhow::Result<Self> {
        let aux_train = build_auxiliary(&model, &splits.train.features, AuxRole::Train)?;
        let aux_probe = build_auxiliary(&model, &splits.probe.features, AuxRole::Probe)?;
        let forest = if config.methods.iter().any(|m| matches!(m, Method::Silo | Method::Maple)) {
            Some(fit_neighborhood_forest(&aux_train, &neighborhood_forest_config(config.seed))?)
        } else {
            None
        };
        let scaler = MinMaxScaler::fit(&aux_train.features)?;
        Ok(Explainer {
            splits,
            model,
            estimator,
            aux_train,
            aux_probe,
            forest,
            scaler,
        })
    }

    /// Loads the checkpoints written by `train` from `model_dir`.
    pub fn load(config: &ExperimentConfig, model_dir: &Path) -> anyhow::Result<Self> {
        let est_path = model_dir.join(ESTIMATOR_FILE);
        let bb_path = model_dir.join(BLACKBOX_FILE);
        for p in [&est_path, &bb_path] {
            if !p.is_file() {
                bail!("missing checkpoint file {}", p.display());
            }
        }
        let estimator =
            WeightEstimator::load(&est_path).with_context(|| format!("cannot load {}", est_path.display()))?;
        let model = BlackBoxModel::load(&bb_path).with_context(|| format!("cannot load {}", bb_path.display()))?;
        Self::new(config, load_splits(config)?, model, estimator)
    }

    pub fn fit(config: &ExperimentConfig) -> anyhow::Result<Self> {
        let splits = load_splits(config)?;
        let art = run_pipeline(&splits.train, Some(&splits.probe), &config.blackbox, &config.seeded_pipeline())?;
        Self::new(config, splits, art.blackbox, art.estimator)
    }

    /// Method-major: all rows for the first method, then the next.
    pub fn explain(&self, config: &ExperimentConfig, rows: &Matrix) -> anyhow::Result<Vec<Explanation>> {
        if rows.cols() != self.aux_train.dim() {
            bail!("rows have {} features, the model expects {}", rows.cols(), self.aux_train.dim());
        }
        let local = config.pipeline.local_kind;
        let mut lime = config.seeded_lime();
        lime.local_kind = local;
        let index = self.forest.as_ref().map(|f| SiloIndex::new(f, &self.aux_train.features)).transpose()?;
        let k_grid = default_k_grid(rows.cols());
        let mut out = Vec::with_capacity(rows.rows() * config.methods.len());
        for &method in &config.methods {
            for (i, x) in rows.row_iter().enumerate() {
                let e = match method {
                    Method::RlLim => explain_instance(
                        i,
                        x,
                        &self.estimator,
                        &self.aux_train,
                        &self.model,
                        local,
                        config.pipeline.top_k,
                    )?,
                    Method::Lime => lime_explain(i, x, &self.model, &lime, &self.scaler)?,
                    Method::Silo => silo_explain(i, x, index.as_ref().expect("forest built"), &self.aux_train, &self.model, local)?,
                    Method::Maple => maple_explain(
                        i,
                        x,
                        self.forest.as_ref().expect("forest built"),
                        index.as_ref().expect("forest built"),
                        &self.aux_train,
                        &self.aux_probe,
                        &self.model,
                        local,
                        &k_grid,
                    )?,
                };
                out.push(e);
            }
        }
        Ok(out)
    }
}

fn write_explanations(staging: &Staging, explanations: &[Explanation], rows: &Matrix, names: &[String]) -> anyhow::Result<()> {
    let per_method = rows.rows().max(1);
    let features: Vec<&[f64]> = explanations.iter().enumerate().map(|(k, _)| rows.row(k % per_method)).collect();
    write_explanations_csv(explanations, &features, names, staging.create("explanations.csv")?)?;
    Ok(())
}

pub fn explain(config: &ExperimentConfig, model_dir: &Path, input: Option<&Path>, out: &Path) -> anyhow::Result<usize> {
    check(config)?;
    let explainer = Explainer::load(config, model_dir)?;
    let names = explainer.splits.train.feature_names.clone();
    let rows = match input {
        Some(p) => read_feature_rows(p, &names)?,
        None => explainer.splits.test.features.clone(),
    };
    let staging = stage(config, out)?;
    let explanations = explainer.explain(config, &rows)?;
    write_explanations(&staging, &explanations, &rows, &names)?;
    staging.commit()?;
    Ok(explanations.len())
}

/// Per-method fidelity reports on the test split.
pub fn evaluate(config: &ExperimentConfig, model_dir: Option<&Path>, out: &Path) -> anyhow::Result<Vec<MetricsReport>> {
    check(config)?;
    let explainer = match model_dir {
        Some(dir) => Explainer::load(config, dir)?,
        None => Explainer::fit(config)?,
    };
    let staging = stage(config, out)?;
    let test = &explainer.splits.test;
    let explanations = explainer.explain(config, &test.features)?;
    let reports = metrics_reports(config, &explainer, test, &explanations)?;
    write_explanations(&staging, &explanations, &test.features, &test.feature_names)?;
    staging.write("metrics.json", to_json(&reports)?)?;
    staging.commit()?;
    Ok(reports)
}

fn dataset_name(config: &ExperimentConfig) -> String {
    match &config.dataset {
        crate::config::DatasetSource::Synthetic { kind, .. } => kind.name().to_string(),
        crate::config::DatasetSource::Csv { path, .. } => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "csv".into()),
    }
}

pub fn metrics_reports(
    config: &ExperimentConfig,
    explainer: &Explainer,
    test: &Dataset,
    explanations: &[Explanation],
) -> anyhow::Result<Vec<MetricsReport>> {
    let raw = explainer.model.predict_batch(&test.features)?;
    let (task_mae, task_apr) = match test.task {
        Task::Regression => (Some(mae(&raw, &test.labels)?), None),
        Task::Classification => {
            let labels: Vec<bool> = test.labels.iter().map(|&l| l == 1.0).collect();
            (None, apr(&raw, &labels).ok())
        }
    };
    let n = test.len();
    let mut reports = Vec::new();
    for (k, &method) in config.methods.iter().enumerate() {
        let chunk = &explanations[k * n..(k + 1) * n];
        let local: Vec<f64> = chunk.iter().map(|e| e.local_prediction).collect();
        let bb: Vec<f64> = chunk.iter().map(|e| e.blackbox_prediction).collect();
        let awd_deciles = match test.synthetic {
            Some(kind) if chunk.iter().all(|e| e.model.coefficients().is_some()) => {
                let points = chunk
                    .iter()
                    .enumerate()
                    .map(|(i, e)| {
                        let x = test.features.row(i);
                        let truth = kind.true_coefficients(x);
                        let coef = e.model.coefficients().expect("checked above");
                        Ok(AwdPoint {
                            distance: kind.boundary_statistic(x).abs(),
                            awd: awd_with_norm(&truth, coef, config.awd_norm)?,
                        })
                    })
                    .collect::<rllim::Result<Vec<_>>>()?;
                Some(decile_bucket_awd(&[points])?)
            }
            _ => None,
        };
        reports.push(MetricsReport {
            method: method.name().to_string(),
            dataset: dataset_name(config),
            blackbox: explainer.model.kind_name().to_string(),
            local_kind: config.pipeline.local_kind.name().to_string(),
            mae: task_mae,
            apr: task_apr,
            lmae: lmae(&local, &bb)?,
            r2: r2_score(&bb, &local).ok(),
            awd_norm: awd_deciles.as_ref().map(|_| config.awd_norm),
            awd_deciles,
            seed: config.seed,
        });
    }
    Ok(reports)
}

pub fn sweep(config: &ExperimentConfig, out: &Path) -> anyhow::Result<LambdaSweepResult> {
    let staging = stage(config, out)?;
    let splits = load_splits(config)?;
    let result = sweep_lambda(
        &config.lambda_grid,
        &splits.train,
        Some(&splits.probe),
        &config.blackbox,
        &config.seeded_pipeline(),
    )?;
    result.write_csv(staging.create("sweep.csv")?)?;
    staging.commit()?;
    Ok(result)
}

/// Inputs of `subgroup-report`, saved as its provenance record.
#[derive(Debug, Clone, Serialize)]
struct SubgroupInputs<'a> {
    explanations: &'a Path,
    groups: &'a crate::subgroup::GroupSpec,
}

pub fn subgroup_report(explanations: &Path, groups: &Path, out: &Path) -> anyhow::Result<PathBuf> {
    let spec = crate::subgroup::GroupSpec::from_file(groups)?;
    let file = std::fs::File::open(explanations).with_context(|| format!("cannot open {}", explanations.display()))?;
    let table = rllim::explanation::read_explanations_csv(file)?;
    let report = crate::subgroup::subgroup_means(&table, &spec)?;
    let staging = Staging::new(out)?;
    staging.write(
        CONFIG_FILE,
        to_json(&SubgroupInputs {
            explanations,
            groups: &spec,
        })?,
    )?;
    report.write_csv(staging.create("subgroups.csv")?)?;
    staging.commit()
}
