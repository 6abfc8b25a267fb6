use serde::{Deserialize, Serialize};

use crate::cart::{Criterion, Tree, TreeParams};
use crate::data::Task;
use crate::error::{check_same_len, Error, Result};
use crate::numerics::{Matrix, RandomSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf_size: usize,
    pub bootstrap: bool,
    /// Features tried per split. `None` picks √d for classification and
    /// max(1, d/3) for regression.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_leaf_size: 1,
            bootstrap: true,
            max_features: None,
            seed: 0,
        }
    }
}

/// Bagged CART ensemble. Predictions are the mean of the trees' leaf values
/// (the class-1 fraction for classification).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
    pub task: Task,
    pub max_depth: Option<usize>,
    pub min_leaf_size: usize,
    /// Row indices drawn for each tree (with repetition).
    pub bootstrap_indices: Vec<Vec<usize>>,
    /// Mean impurity decrease per feature, normalised to sum to 1.
    pub importance: Vec<f64>,
    pub dim: usize,
}

impl RandomForest {
    pub fn fit(x: &Matrix, y: &[f64], task: Task, config: &ForestConfig) -> Result<Self> {
        check_same_len(x.rows(), y.len())?;
        if x.is_empty() {
            return Err(Error::invalid("cannot fit a forest on an empty dataset"));
        }
        if config.n_trees == 0 {
            return Err(Error::Config("forest needs at least one tree".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite target"));
        }
        if task == Task::Classification && y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid("classification targets must be 0 or 1"));
        }
        let n = x.rows();
        let d = x.cols();
        let max_features = config.max_features.unwrap_or(match task {
            Task::Classification => (d as f64).sqrt().round().max(1.0) as usize,
            Task::Regression => (d / 3).max(1),
        });
        let params = TreeParams {
            max_depth: config.max_depth,
            min_leaf_weight: config.min_leaf_size.max(1) as f64,
            max_features: Some(max_features.min(d)),
            criterion: match task {
                Task::Classification => Criterion::Gini,
                Task::Regression => Criterion::Variance,
            },
        };
        let root = RandomSource::new(config.seed).derive(crate::numerics::Stream::Bootstrap);
        let mut trees = Vec::with_capacity(config.n_trees);
        let mut bootstrap_indices = Vec::with_capacity(config.n_trees);
        let mut importance = vec![0.0; d];
        for t in 0..config.n_trees {
            let mut rng = root.child(t as u64);
            let mut weights = vec![0.0; n];
            let drawn: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.index(n)).collect()
            } else {
                (0..n).collect()
            };
            for &i in &drawn {
                weights[i] += 1.0;
            }
            let tree = Tree::fit(x, y, &weights, &params, Some(&mut rng));
            for (acc, v) in importance.iter_mut().zip(&tree.impurity_decrease) {
                *acc += v;
            }
            trees.push(tree);
            bootstrap_indices.push(drawn);
        }
        let total: f64 = importance.iter().sum();
        if total > 0.0 {
            importance.iter_mut().for_each(|v| *v /= total);
        } else {
            // no tree split at all: spread the mass evenly
            importance.iter_mut().for_each(|v| *v = 1.0 / d as f64);
        }
        Ok(RandomForest {
            trees,
            task,
            max_depth: config.max_depth,
            min_leaf_size: config.min_leaf_size,
            bootstrap_indices,
            importance,
            dim: d,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// Leaf index of `x` in every tree.
    pub fn leaf_indices(&self, x: &[f64]) -> Vec<usize> {
        self.trees.iter().map(|t| t.leaf_index(x)).collect()
    }
}
