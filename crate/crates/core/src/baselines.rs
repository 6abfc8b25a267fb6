//! Comparison explainers: LIME (perturbation + distance kernel), SILO
//! (random-forest leaf co-occurrence neighbourhoods) and MAPLE (SILO plus
//! importance-ranked feature selection).

use serde::{Deserialize, Serialize};

use crate::blackbox::{AuxiliaryDataset, BlackBoxModel, ForestConfig, RandomForest};
use crate::cart::Node;
use crate::data::Task;
use crate::error::{Error, Result};
use crate::explanation::{Explanation, Method};
use crate::interpretable::{fit_ridge_on, fit_tree_on, LocalKind, LocalModel, Surrogate};
use crate::numerics::{Matrix, MinMaxScaler, RandomSource, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeConfig {
    pub perturbations: usize,
    /// Kernel width in scaled units; `None` means `0.75·√d`.
    pub kernel_width: Option<f64>,
    /// Standard deviation of the Gaussian perturbations in scaled units.
    pub perturbation_scale: f64,
    pub local_kind: LocalKind,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            perturbations: 5000,
            kernel_width: None,
            perturbation_scale: 1.0,
            local_kind: LocalKind::ridge(),
            seed: 0,
        }
    }
}

impl LimeConfig {
    pub fn width(&self, dim: usize) -> f64 {
        self.kernel_width.unwrap_or(0.75 * (dim as f64).sqrt())
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.perturbations < dim + 2 {
            return Err(Error::Config(format!(
                "LIME needs at least d+2 = {} perturbations, got {}",
                dim + 2,
                self.perturbations
            )));
        }
        let w = self.width(dim);
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::Config("LIME kernel width must be positive".into()));
        }
        if !(self.perturbation_scale.is_finite() && self.perturbation_scale > 0.0) {
            return Err(Error::Config("LIME perturbation scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborhoodSource {
    Lime,
    Silo,
    Maple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodWeights {
    pub weights: Vec<f64>,
    pub source: NeighborhoodSource,
}

impl NeighborhoodWeights {
    fn new(weights: Vec<f64>, source: NeighborhoodSource) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("neighbourhood weights must be finite and nonnegative"));
        }
        if weights.iter().all(|w| *w == 0.0) {
            return Err(Error::DegenerateWeights("query shares no neighbourhood with the training set".into()));
        }
        Ok(NeighborhoodWeights { weights, source })
    }
}

fn fit_kind(x: &Matrix, y: &[f64], w: &[f64], kind: LocalKind) -> Result<LocalModel> {
    match kind {
        LocalKind::Ridge { alpha } => fit_ridge_on(x, y, w, alpha),
        LocalKind::ShallowTree { max_depth } => fit_tree_on(x, y, w, max_depth),
    }
}

/// Perturbation-based explanation. `train_scaler` supplies the scaled space
/// in which perturbations are drawn and distances measured; the surrogate is
/// fitted on the perturbations mapped back to raw feature space so that its
/// coefficients are comparable across methods.
pub fn lime_explain(
    instance_id: usize,
    x_t: &[f64],
    model: &BlackBoxModel,
    config: &LimeConfig,
    train_scaler: &MinMaxScaler,
) -> Result<Explanation> {
    let d = x_t.len();
    if train_scaler.dim() != d || model.input_dim() != d {
        return Err(Error::invalid("LIME query, scaler and black box disagree on the dimension"));
    }
    config.validate(d)?;
    let sigma2 = config.width(d).powi(2);
    // Each query gets its own stream so explanations do not depend on order.
    let mut rng = RandomSource::new(config.seed)
        .derive(Stream::Perturbation)
        .child(instance_id as u64);
    let center = train_scaler.transform_row(x_t);
    let n = config.perturbations;
    let mut raw = Vec::with_capacity(n * d);
    let mut targets = Vec::with_capacity(n);
    let mut kernel = Vec::with_capacity(n);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        let mut dist2 = 0.0;
        for (zc, c) in z.iter_mut().zip(&center) {
            let step = config.perturbation_scale * rng.standard_normal();
            *zc = c + step;
            dist2 += step * step;
        }
        let row = train_scaler.inverse_transform_row(&z);
        targets.push(model.predict_target(&row)?);
        raw.extend_from_slice(&row);
        kernel.push((-dist2 / sigma2).exp());
    }
    let x = Matrix::new(n, d, raw)?;
    let local = fit_kind(&x, &targets, &kernel, config.local_kind)?;
    Ok(Explanation::new(
        instance_id,
        Method::Lime,
        x_t,
        Vec::new(),
        local,
        model.predict_target(x_t)?,
    ))
}

/// Forest settings used for SILO/MAPLE neighbourhoods: 100 trees, leaves of
/// at least 10 instances.
pub fn neighborhood_forest_config(seed: u64) -> ForestConfig {
    ForestConfig {
        n_trees: 100,
        min_leaf_size: 10,
        seed,
        ..ForestConfig::default()
    }
}

/// Fits the neighbourhood forest on the auxiliary targets.
pub fn fit_neighborhood_forest(aux_train: &AuxiliaryDataset, config: &ForestConfig) -> Result<RandomForest> {
    RandomForest::fit(&aux_train.features, &aux_train.targets, Task::Regression, config)
}

/// Leaf assignments of the training set, precomputed so that each query costs
/// one pass over the trees plus one over the training rows.
#[derive(Debug, Clone)]
pub struct SiloIndex<'a> {
    forest: &'a RandomForest,
    /// `leaves[t][i]`: leaf of training row `i` in tree `t`.
    leaves: Vec<Vec<usize>>,
    /// `counts[t][leaf]`: training rows in that leaf.
    counts: Vec<Vec<usize>>,
}

impl<'a> SiloIndex<'a> {
    pub fn new(forest: &'a RandomForest, train_features: &Matrix) -> Result<Self> {
        if train_features.cols() != forest.dim {
            return Err(Error::invalid("training features differ in dimension from the forest"));
        }
        let mut leaves = Vec::with_capacity(forest.trees.len());
        let mut counts = Vec::with_capacity(forest.trees.len());
        for tree in &forest.trees {
            let l: Vec<usize> = train_features.row_iter().map(|r| tree.leaf_index(r)).collect();
            let mut c = vec![0usize; tree.leaf_count];
            for &leaf in &l {
                c[leaf] += 1;
            }
            leaves.push(l);
            counts.push(c);
        }
        Ok(SiloIndex { forest, leaves, counts })
    }

    pub fn len(&self) -> usize {
        self.leaves.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `wᵢ = (1/T) Σₜ 1[leafₜ(x) = leafₜ(xᵢ)] / |leafₜ(x)|`
    pub fn weights(&self, x: &[f64]) -> Result<NeighborhoodWeights> {
        if x.len() != self.forest.dim {
            return Err(Error::invalid("query dimension differs from the forest"));
        }
        let t_count = self.forest.trees.len() as f64;
        let mut w = vec![0.0; self.len()];
        for ((tree, leaves), counts) in self.forest.trees.iter().zip(&self.leaves).zip(&self.counts) {
            let leaf = tree.leaf_index(x);
            let m = counts[leaf];
            if m == 0 {
                continue;
            }
            let share = 1.0 / (m as f64 * t_count);
            for (wi, &li) in w.iter_mut().zip(leaves) {
                if li == leaf {
                    *wi += share;
                }
            }
        }
        NeighborhoodWeights::new(w, NeighborhoodSource::Silo)
    }
}

pub fn silo_weights(x_t: &[f64], forest: &RandomForest, train_features: &Matrix) -> Result<NeighborhoodWeights> {
    SiloIndex::new(forest, train_features)?.weights(x_t)
}

pub fn silo_explain(
    instance_id: usize,
    x_t: &[f64],
    index: &SiloIndex<'_>,
    aux_train: &AuxiliaryDataset,
    model: &BlackBoxModel,
    local_kind: LocalKind,
) -> Result<Explanation> {
    let nw = index.weights(x_t)?;
    let local = fit_kind(&aux_train.features, &aux_train.targets, &nw.weights, local_kind)?;
    Ok(Explanation::new(
        instance_id,
        Method::Silo,
        x_t,
        nw.weights,
        local,
        model.predict_target(x_t)?,
    ))
}

/// `{1, …, min(d, 25)}`
pub fn default_k_grid(dim: usize) -> Vec<usize> {
    (1..=dim.min(25)).collect()
}

/// Features ordered by descending importance, ties by ascending index.
pub fn importance_ranking(importance: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    order
}

/// Lifts a surrogate fitted on the columns `kept` (ascending) back to the
/// full feature space; dropped features get zero coefficients.
fn embed(local: LocalModel, kept: &[usize], dim: usize) -> LocalModel {
    let surrogate = match local.surrogate {
        Surrogate::Ridge {
            coefficients,
            intercept,
            alpha,
        } => {
            let mut full = vec![0.0; dim];
            for (&k, c) in kept.iter().zip(coefficients) {
                full[k] = c;
            }
            Surrogate::Ridge {
                coefficients: full,
                intercept,
                alpha,
            }
        }
        Surrogate::ShallowTree { mut tree } => {
            for node in &mut tree.nodes {
                if let Node::Split { feature, .. } = node {
                    *feature = kept[*feature];
                }
            }
            let mut dec = vec![0.0; dim];
            for (&k, v) in kept.iter().zip(&tree.impurity_decrease) {
                dec[k] = *v;
            }
            tree.impurity_decrease = dec;
            tree.dim = dim;
            Surrogate::ShallowTree { tree }
        }
    };
    LocalModel {
        surrogate,
        diagnostics: local.diagnostics,
    }
}

fn weighted_abs_error(local: &LocalModel, x: &Matrix, y: &[f64], w: &[f64]) -> Option<f64> {
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let err: f64 = x
        .row_iter()
        .zip(y)
        .zip(w)
        .filter(|(_, wi)| **wi > 0.0)
        .map(|((r, t), wi)| wi * (local.predict(r) - t).abs())
        .sum();
    Some(err / total)
}

/// SILO weights plus a search over the number of top-importance features.
/// Each candidate is scored by its SILO-weighted absolute error on the probe
/// set (probe rows weighted by leaf co-occurrence with `x_t`); if no probe row
/// shares a leaf with `x_t`, the weighted training error is used instead.
#[allow(clippy::too_many_arguments)]
pub fn maple_explain(
    instance_id: usize,
    x_t: &[f64],
    forest: &RandomForest,
    index: &SiloIndex<'_>,
    aux_train: &AuxiliaryDataset,
    probe: &AuxiliaryDataset,
    model: &BlackBoxModel,
    local_kind: LocalKind,
    k_grid: &[usize],
) -> Result<Explanation> {
    let d = x_t.len();
    if k_grid.is_empty() || k_grid.iter().any(|&k| k == 0 || k > d) {
        return Err(Error::Config(format!("MAPLE k grid must be a nonempty subset of 1..={d}")));
    }
    let nw = index.weights(x_t)?;
    let probe_w = co_occurrence(forest, x_t, probe, index)?;
    let use_probe = probe_w.iter().any(|w| *w > 0.0);
    let ranking = importance_ranking(&forest.importance);
    let mut best: Option<(f64, LocalModel)> = None;
    for &k in k_grid {
        let mut kept = ranking[..k].to_vec();
        kept.sort_unstable();
        let x_k = aux_train.features.select_columns(&kept);
        let local = embed(fit_kind(&x_k, &aux_train.targets, &nw.weights, local_kind)?, &kept, d);
        let score = if use_probe {
            weighted_abs_error(&local, &probe.features, &probe.targets, &probe_w)
        } else {
            weighted_abs_error(&local, &aux_train.features, &aux_train.targets, &nw.weights)
        }
        .expect("weights checked nonzero");
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, local));
        }
    }
    let (_, local) = best.expect("nonempty grid");
    Ok(Explanation::new(
        instance_id,
        Method::Maple,
        x_t,
        nw.weights,
        local,
        model.predict_target(x_t)?,
    ))
}

/// Leaf co-occurrence weights of `rows` with `x`, normalised by the training
/// leaf sizes so they are on the same scale as the SILO weights.
fn co_occurrence(forest: &RandomForest, x: &[f64], rows: &AuxiliaryDataset, index: &SiloIndex<'_>) -> Result<Vec<f64>> {
    if rows.dim() != forest.dim {
        return Err(Error::invalid("probe features differ in dimension from the forest"));
    }
    let t_count = forest.trees.len() as f64;
    let mut w = vec![0.0; rows.len()];
    for (tree, counts) in forest.trees.iter().zip(&index.counts) {
        let leaf = tree.leaf_index(x);
        let m = counts[leaf].max(1) as f64;
        for (wi, r) in w.iter_mut().zip(rows.features.row_iter()) {
            if tree.leaf_index(r) == leaf {
                *wi += 1.0 / (m * t_count);
            }
        }
    }
    Ok(w)
}
