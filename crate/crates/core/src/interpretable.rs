//! Locally interpretable surrogates (weighted ridge, depth-capped regression
//! tree) and the global interpretable baseline.

use serde::{Deserialize, Serialize};

use crate::blackbox::AuxiliaryDataset;
use crate::cart::{Criterion, Tree, TreeParams};
use crate::error::{check_same_len, Error, Result};
use crate::numerics::{weighted_ridge_fit, Matrix};

pub const MAX_TREE_DEPTH: usize = 3;
/// Minimum total instance weight on each side of a surrogate-tree split.
pub const MIN_LEAF_WEIGHT: f64 = 1.0;
pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalKind {
    Ridge { alpha: f64 },
    ShallowTree { max_depth: usize },
}

impl LocalKind {
    pub fn ridge() -> Self {
        LocalKind::Ridge { alpha: DEFAULT_ALPHA }
    }

    pub fn tree() -> Self {
        LocalKind::ShallowTree {
            max_depth: MAX_TREE_DEPTH,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LocalKind::Ridge { .. } => "ridge",
            LocalKind::ShallowTree { .. } => "tree",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Surrogate {
    Ridge {
        coefficients: Vec<f64>,
        intercept: f64,
        alpha: f64,
    },
    ShallowTree { tree: Tree },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub weight_sum: f64,
    /// Instances with nonzero weight.
    pub selected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalModel {
    pub surrogate: Surrogate,
    pub diagnostics: FitDiagnostics,
}

impl LocalModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match &self.surrogate {
            Surrogate::Ridge {
                coefficients,
                intercept,
                ..
            } => intercept + coefficients.iter().zip(x).map(|(a, b)| a * b).sum::<f64>(),
            Surrogate::ShallowTree { tree } => tree.predict(x),
        }
    }

    /// Ridge coefficients; `None` for trees.
    pub fn coefficients(&self) -> Option<&[f64]> {
        match &self.surrogate {
            Surrogate::Ridge { coefficients, .. } => Some(coefficients),
            Surrogate::ShallowTree { .. } => None,
        }
    }

    pub fn intercept(&self) -> Option<f64> {
        match &self.surrogate {
            Surrogate::Ridge { intercept, .. } => Some(*intercept),
            Surrogate::ShallowTree { .. } => None,
        }
    }
}

fn diagnostics(weights: &[f64]) -> FitDiagnostics {
    FitDiagnostics {
        weight_sum: weights.iter().sum(),
        selected: weights.iter().filter(|w| **w > 0.0).count(),
    }
}

fn check_weights(aux: &AuxiliaryDataset, weights: &[f64]) -> Result<()> {
    check_same_len(aux.len(), weights.len())?;
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::DegenerateWeights("weights sum to zero".into()));
    }
    Ok(())
}

pub fn fit_local_ridge(aux: &AuxiliaryDataset, weights: &[f64], alpha: f64) -> Result<LocalModel> {
    fit_ridge_on(&aux.features, &aux.targets, weights, alpha)
}

pub(crate) fn fit_ridge_on(x: &Matrix, y: &[f64], weights: &[f64], alpha: f64) -> Result<LocalModel> {
    let sol = weighted_ridge_fit(x, y, weights, alpha)?;
    Ok(LocalModel {
        surrogate: Surrogate::Ridge {
            coefficients: sol.coefficients,
            intercept: sol.intercept,
            alpha: sol.alpha_used,
        },
        diagnostics: diagnostics(weights),
    })
}

pub fn fit_local_tree(aux: &AuxiliaryDataset, weights: &[f64], max_depth: usize) -> Result<LocalModel> {
    check_weights(aux, weights)?;
    fit_tree_on(&aux.features, &aux.targets, weights, max_depth)
}

pub(crate) fn fit_tree_on(x: &Matrix, y: &[f64], weights: &[f64], max_depth: usize) -> Result<LocalModel> {
    if max_depth > MAX_TREE_DEPTH {
        return Err(Error::invalid(format!("surrogate trees are capped at depth {MAX_TREE_DEPTH}")));
    }
    let params = TreeParams {
        max_depth: Some(max_depth),
        min_leaf_weight: MIN_LEAF_WEIGHT,
        max_features: None,
        criterion: Criterion::Variance,
    };
    let tree = Tree::fit(x, y, weights, &params, None);
    Ok(LocalModel {
        surrogate: Surrogate::ShallowTree { tree },
        diagnostics: diagnostics(weights),
    })
}

/// Fits either surrogate kind.
pub fn fit_local(aux: &AuxiliaryDataset, weights: &[f64], kind: LocalKind) -> Result<LocalModel> {
    match kind {
        LocalKind::Ridge { alpha } => fit_local_ridge(aux, weights, alpha),
        LocalKind::ShallowTree { max_depth } => fit_local_tree(aux, weights, max_depth),
    }
}

/// Globally interpretable model fitted once with uniform weights; it is never
/// mutated after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    model: LocalModel,
}

impl BaselineModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.model.predict(x)
    }

    pub fn model(&self) -> &LocalModel {
        &self.model
    }

    /// Fingerprint of the fitted parameters, for checking that a run left the
    /// baseline untouched.
    pub fn checksum(&self) -> u64 {
        let bytes = serde_json::to_vec(&self.model).expect("serialisable");
        // FNV-1a
        bytes.iter().fold(0xcbf2_9ce4_8422_2325_u64, |h, &b| {
            (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }
}

pub fn fit_global_baseline(aux_train: &AuxiliaryDataset, kind: LocalKind) -> Result<BaselineModel> {
    if aux_train.is_empty() {
        return Err(Error::invalid("baseline needs a nonempty auxiliary training set"));
    }
    let uniform = vec![1.0; aux_train.len()];
    Ok(BaselineModel {
        model: fit_local(aux_train, &uniform, kind)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::AuxRole;

    fn aux(rows: &[Vec<f64>], targets: &[f64]) -> AuxiliaryDataset {
        AuxiliaryDataset {
            features: Matrix::from_rows(rows).unwrap(),
            targets: targets.to_vec(),
            role: AuxRole::Train,
        }
    }

    #[test]
    fn one_hot_weight_interpolates() {
        let a = aux(&[vec![1.0, 2.0], vec![0.0, -1.0], vec![3.0, 3.0]], &[5.0, -2.0, 8.0]);
        let m = fit_local_ridge(&a, &[0.0, 1.0, 0.0], 0.0).unwrap();
        assert!((m.predict(&[0.0, -1.0]) + 2.0).abs() < 1e-6);
        assert_eq!(m.diagnostics.selected, 1);
    }

    #[test]
    fn half_and_unit_weights_agree_without_penalty() {
        let a = aux(
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.3]],
            &[1.0, 2.0, 2.5, 0.0, 1.1],
        );
        let m1 = fit_local_ridge(&a, &[0.5; 5], 0.0).unwrap();
        let m2 = fit_local_ridge(&a, &[1.0; 5], 0.0).unwrap();
        for (p, q) in m1.coefficients().unwrap().iter().zip(m2.coefficients().unwrap()) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn tree_single_split_and_constant_leaf() {
        let a = aux(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]], &[2.0, 2.0, 6.0, 6.0]);
        let m = fit_local_tree(&a, &[1.0; 4], 3).unwrap();
        let Surrogate::ShallowTree { tree } = &m.surrogate else { panic!() };
        assert_eq!(tree.depth(), 1);
        assert_eq!(m.predict(&[0.5]), 2.0);
        assert_eq!(m.predict(&[2.5]), 6.0);

        let a = aux(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]], &[4.2, 9.0, 4.2, -3.0]);
        let m = fit_local_tree(&a, &[1.0, 0.0, 1.0, 0.0], 3).unwrap();
        let Surrogate::ShallowTree { tree } = &m.surrogate else { panic!() };
        assert_eq!(tree.nodes.len(), 1);
        for x in [-5.0, 1.0, 10.0] {
            assert_eq!(m.predict(&[x]), 4.2);
        }
    }

    #[test]
    fn tree_depth_capped() {
        assert!(fit_local_tree(&aux(&[vec![0.0]], &[1.0]), &[1.0], 4).is_err());
        let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
        let targets: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64).collect();
        let m = fit_local_tree(&aux(&rows, &targets), &[1.0; 64], 3).unwrap();
        let Surrogate::ShallowTree { tree } = &m.surrogate else { panic!() };
        assert!(tree.depth() <= 3);
    }

    #[test]
    fn baseline_exact_on_linear_targets() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 * 0.1, ((i * 7) % 5) as f64]).collect();
        let targets: Vec<f64> = rows.iter().map(|r| 1.0 + 2.0 * r[0] - 0.5 * r[1]).collect();
        let a = aux(&rows, &targets);
        let b = fit_global_baseline(&a, LocalKind::Ridge { alpha: 0.0 }).unwrap();
        let lmae = rows.iter().zip(&targets).map(|(r, t)| (b.predict(r) - t).abs()).sum::<f64>() / 30.0;
        assert!(lmae < 1e-6);
        assert_eq!(b.checksum(), b.clone().checksum());
    }

    #[test]
    fn degenerate_weights_rejected() {
        let a = aux(&[vec![0.0], vec![1.0]], &[1.0, 2.0]);
        assert!(matches!(fit_local_tree(&a, &[0.0, 0.0], 3), Err(Error::DegenerateWeights(_))));
        assert!(matches!(fit_local_ridge(&a, &[0.0, 0.0], 1.0), Err(Error::DegenerateWeights(_))));
    }
}
