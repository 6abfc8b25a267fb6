//! Experiment configuration: one JSON document drives every command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rllim::baselines::LimeConfig;
use rllim::bench::SynthBenchConfig;
use rllim::data::{Schema, SplitSpec, SyntheticKind};
use rllim::explanation::Method;
use rllim::interpretable::LocalKind;
use rllim::metrics::AwdNorm;
use rllim::pipeline::{BlackBoxSpec, PipelineConfig, DEFAULT_LAMBDA_GRID};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaRef {
    Inline(Schema),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic {
        kind: SyntheticKind,
        #[serde(default = "default_size")]
        train_size: usize,
        #[serde(default = "default_size")]
        probe_size: usize,
        #[serde(default = "default_size")]
        test_size: usize,
    },
    Csv {
        path: PathBuf,
        /// Omitted: numeric columns are inferred and `label_column` (or the
        /// last column) becomes the label.
        #[serde(default)]
        schema: Option<SchemaRef>,
        #[serde(default)]
        label_column: Option<String>,
        #[serde(default)]
        positive_label: Option<String>,
        #[serde(default = "default_split")]
        split: SplitFractions,
        /// Seeded subsample taken before splitting.
        #[serde(default)]
        max_rows: Option<usize>,
    },
}

fn default_size() -> usize {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub probe: f64,
    pub test: f64,
}

fn default_split() -> SplitFractions {
    SplitFractions {
        train: 0.8,
        probe: 0.1,
        test: 0.1,
    }
}

impl SplitFractions {
    pub fn with_seed(self, seed: u64) -> SplitSpec {
        SplitSpec {
            train: self.train,
            probe: self.probe,
            test: self.test,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub blackbox: BlackBoxSpec,
    pub pipeline: PipelineConfig,
    pub lime: LimeConfig,
    pub lambda_grid: Vec<f64>,
    /// Root seed; overrides the seeds of training, LIME, the split and the
    /// synthetic generators.
    pub seed: u64,
    /// Independent runs aggregated by `synth-bench`.
    pub runs: usize,
    pub methods: Vec<Method>,
    pub awd_norm: AwdNorm,
    pub lime_floor: f64,
    pub min_deciles_won: usize,
    /// Not part of the provenance snapshot.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let bench = SynthBenchConfig::default();
        ExperimentConfig {
            dataset: DatasetSource::Synthetic {
                kind: SyntheticKind::Syn1,
                train_size: bench.train_size,
                probe_size: bench.probe_size,
                test_size: bench.test_size,
            },
            blackbox: BlackBoxSpec::Oracle,
            pipeline: bench.pipeline,
            lime: bench.lime,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            seed: 0,
            runs: bench.runs,
            methods: vec![Method::RlLim],
            awd_norm: bench.awd_norm,
            lime_floor: bench.lime_floor,
            min_deciles_won: bench.min_deciles_won,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("invalid config {}: {e}", path.display()))
    }

    /// Pretty JSON of the resolved configuration, output directory excluded.
    pub fn to_json(&self) -> anyhow::Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Every problem found; empty when the configuration is usable.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        match &self.dataset {
            DatasetSource::Synthetic {
                train_size,
                probe_size,
                test_size,
                ..
            } => {
                if *train_size < 2 {
                    problems.push("dataset.train_size must be ≥ 2".into());
                }
                if *probe_size == 0 || *test_size == 0 {
                    problems.push("dataset.probe_size and dataset.test_size must be ≥ 1".into());
                }
            }
            DatasetSource::Csv {
                path,
                schema,
                split,
                max_rows,
                ..
            } => {
                if !path.is_file() {
                    problems.push(format!("dataset.path {} does not exist", path.display()));
                }
                if let Some(SchemaRef::File(p)) = schema {
                    if !p.is_file() {
                        problems.push(format!("dataset.schema {} does not exist", p.display()));
                    }
                }
                if let Err(e) = split.with_seed(self.seed).validate() {
                    problems.push(format!("dataset.split: {e}"));
                }
                if *max_rows == Some(0) {
                    problems.push("dataset.max_rows must be ≥ 1".into());
                }
                if matches!(self.blackbox, BlackBoxSpec::Oracle) {
                    problems.push("blackbox.kind oracle needs a synthetic dataset".into());
                }
            }
        }
        match &self.blackbox {
            BlackBoxSpec::Pretrained { path } if !path.is_file() => {
                problems.push(format!("blackbox.path {} does not exist", path.display()));
            }
            BlackBoxSpec::Forest(f) if f.n_trees == 0 => problems.push("blackbox.n_trees must be ≥ 1".into()),
            _ => {}
        }
        if let Err(e) = self.pipeline.train.validate() {
            problems.push(format!("pipeline.train: {e}"));
        }
        if self.pipeline.top_k == Some(0) {
            problems.push("pipeline.top_k must be ≥ 1".into());
        }
        if let LocalKind::Ridge { alpha } = self.pipeline.local_kind {
            if !(alpha.is_finite() && alpha >= 0.0) {
                problems.push("pipeline.local_kind.alpha must be nonnegative".into());
            }
        }
        if self.lime.perturbations < 3 {
            problems.push("lime.perturbations must be ≥ 3".into());
        }
        if self.lime.kernel_width.is_some_and(|w| !(w.is_finite() && w > 0.0)) {
            problems.push("lime.kernel_width must be positive".into());
        }
        if !(self.lime.perturbation_scale.is_finite() && self.lime.perturbation_scale > 0.0) {
            problems.push("lime.perturbation_scale must be positive".into());
        }
        if self.lambda_grid.is_empty() {
            problems.push("lambda_grid must not be empty".into());
        }
        if self.lambda_grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            problems.push("lambda_grid values must be nonnegative".into());
        }
        if self.runs == 0 {
            problems.push("runs must be ≥ 1".into());
        }
        if self.methods.is_empty() {
            problems.push("methods must not be empty".into());
        }
        if self.min_deciles_won > rllim::metrics::DECILES {
            problems.push(format!("min_deciles_won must be ≤ {}", rllim::metrics::DECILES));
        }
        problems
    }

    /// Pipeline settings with the root seed applied.
    pub fn seeded_pipeline(&self) -> PipelineConfig {
        let mut p = self.pipeline.clone();
        p.train.seed = self.seed;
        p
    }

    pub fn seeded_lime(&self) -> LimeConfig {
        LimeConfig {
            seed: self.seed,
            ..self.lime.clone()
        }
    }

    pub fn synth_bench(&self) -> Option<SynthBenchConfig> {
        let DatasetSource::Synthetic {
            kind,
            train_size,
            probe_size,
            test_size,
        } = self.dataset
        else {
            return None;
        };
        Some(SynthBenchConfig {
            kind,
            train_size,
            probe_size,
            test_size,
            runs: self.runs,
            seed: self.seed,
            pipeline: self.pipeline.clone(),
            lime: self.lime.clone(),
            awd_norm: self.awd_norm,
            lime_floor: self.lime_floor,
            min_deciles_won: self.min_deciles_won,
        })
    }
}
