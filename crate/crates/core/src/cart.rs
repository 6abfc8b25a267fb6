//! Weighted CART regression trees.
//!
//! One builder serves the random-forest black box (integer bootstrap counts
//! as weights), the SILO/MAPLE neighbourhood forests, and the depth-capped
//! local surrogate (continuous instance weights). Splits maximise the weighted
//! impurity decrease. For 0/1 targets the Gini criterion is used, which on
//! binary labels is twice the weighted variance.

use serde::{Deserialize, Serialize};

use crate::numerics::{Matrix, RandomSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Variance,
    Gini,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    /// Minimum total weight on each side of a split.
    pub min_leaf_weight: f64,
    /// Features considered per split; `None` means all of them.
    pub max_features: Option<usize>,
    pub criterion: Criterion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        /// Dense leaf index in `0..leaf_count`.
        leaf_id: usize,
        weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub leaf_count: usize,
    pub dim: usize,
    /// Weighted impurity decrease credited to each feature.
    pub impurity_decrease: Vec<f64>,
}

impl Tree {
    fn leaf_node(&self, x: &[f64]) -> &Node {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                leaf => return leaf,
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.leaf_node(x) {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        match self.leaf_node(x) {
            Node::Leaf { leaf_id, .. } => *leaf_id,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Fits on the rows of `x` with positive weight. Zero-weight rows are
    /// dropped before anything else, so they cannot affect the result.
    /// `rng` is needed only when `params.max_features` is set.
    pub fn fit(x: &Matrix, y: &[f64], w: &[f64], params: &TreeParams, mut rng: Option<&mut RandomSource>) -> Tree {
        let active: Vec<usize> = (0..x.rows()).filter(|&i| w[i] > 0.0).collect();
        let mut builder = Builder {
            x,
            y,
            w,
            params,
            nodes: Vec::new(),
            leaf_count: 0,
            impurity_decrease: vec![0.0; x.cols()],
            gain_tol: 0.0,
            order: Vec::with_capacity(active.len()),
        };
        let (_, _, root_sse) = builder.stats(&active);
        builder.gain_tol = 1e-12 * root_sse.max(0.0);
        builder.build(active, 0, &mut rng);
        Tree {
            nodes: builder.nodes,
            leaf_count: builder.leaf_count,
            dim: x.cols(),
            impurity_decrease: builder.impurity_decrease,
        }
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    w: &'a [f64],
    params: &'a TreeParams,
    nodes: Vec<Node>,
    leaf_count: usize,
    impurity_decrease: Vec<f64>,
    gain_tol: f64,
    order: Vec<usize>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    /// (total weight, weighted mean, impurity) of a node.
    fn stats(&self, idx: &[usize]) -> (f64, f64, f64) {
        let mut total = 0.0;
        let mut sum = 0.0;
        for &i in idx {
            total += self.w[i];
            sum += self.w[i] * self.y[i];
        }
        if total <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let mean = sum / total;
        let sse: f64 = idx.iter().map(|&i| self.w[i] * (self.y[i] - mean).powi(2)).sum();
        let impurity = match self.params.criterion {
            Criterion::Variance => sse,
            Criterion::Gini => 2.0 * sse,
        };
        (total, mean, impurity)
    }

    fn push_leaf(&mut self, total: f64, mean: f64) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: mean,
            leaf_id: self.leaf_count,
            weight: total,
        });
        self.leaf_count += 1;
        id
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize, rng: &mut Option<&mut RandomSource>) -> usize {
        let (total, mean, impurity) = self.stats(&idx);
        let depth_ok = self.params.max_depth.is_none_or(|m| depth < m);
        let constant = idx.windows(2).all(|p| self.y[p[0]] == self.y[p[1]]);
        if !depth_ok || constant || total < 2.0 * self.params.min_leaf_weight || idx.len() < 2 {
            return self.push_leaf(total, mean);
        }
        let Some(best) = self.best_split(&idx, impurity, rng) else {
            return self.push_leaf(total, mean);
        };
        self.impurity_decrease[best.feature] += best.gain;
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.x.get(i, best.feature) <= best.threshold);
        let id = self.nodes.len();
        self.nodes.push(Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: 0,
            right: 0,
        });
        let left = self.build(left_idx, depth + 1, rng);
        let right = self.build(right_idx, depth + 1, rng);
        if let Node::Split { left: l, right: r, .. } = &mut self.nodes[id] {
            *l = left;
            *r = right;
        }
        id
    }

    fn candidate_features(&self, rng: &mut Option<&mut RandomSource>) -> Vec<usize> {
        let d = self.x.cols();
        match (self.params.max_features, rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < d => {
                let mut f = rng.sample_indices(d, k.max(1));
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, idx: &[usize], impurity: f64, rng: &mut Option<&mut RandomSource>) -> Option<BestSplit> {
        let scale = match self.params.criterion {
            Criterion::Variance => 1.0,
            Criterion::Gini => 2.0,
        };
        let min_leaf = self.params.min_leaf_weight;
        let mut best: Option<BestSplit> = None;
        let mut order = std::mem::take(&mut self.order);
        for feature in self.candidate_features(rng) {
            order.clear();
            order.extend_from_slice(idx);
            order.sort_by(|&a, &b| self.x.get(a, feature).total_cmp(&self.x.get(b, feature)));
            // Shift targets by the node's first value to limit cancellation.
            let shift = self.y[order[0]];
            let (mut tw, mut ts, mut tq) = (0.0, 0.0, 0.0);
            for &i in &order {
                let v = self.y[i] - shift;
                tw += self.w[i];
                ts += self.w[i] * v;
                tq += self.w[i] * v * v;
            }
            let (mut lw, mut ls, mut lq) = (0.0, 0.0, 0.0);
            for k in 0..order.len() - 1 {
                let i = order[k];
                let v = self.y[i] - shift;
                lw += self.w[i];
                ls += self.w[i] * v;
                lq += self.w[i] * v * v;
                let here = self.x.get(i, feature);
                let next = self.x.get(order[k + 1], feature);
                if here == next {
                    continue;
                }
                let rw = tw - lw;
                if lw < min_leaf || rw < min_leaf {
                    continue;
                }
                let (rs, rq) = (ts - ls, tq - lq);
                let children = (lq - ls * ls / lw).max(0.0) + (rq - rs * rs / rw).max(0.0);
                let gain = impurity - scale * children;
                let threshold = here + 0.5 * (next - here);
                let better = match &best {
                    None => gain > self.gain_tol,
                    Some(b) => gain > b.gain + self.gain_tol,
                };
                if better {
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        gain,
                    });
                }
            }
        }
        self.order = order;
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(depth: Option<usize>) -> TreeParams {
        TreeParams {
            max_depth: depth,
            min_leaf_weight: 1.0,
            max_features: None,
            criterion: Criterion::Variance,
        }
    }

    #[test]
    fn single_threshold() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let y = [1.0, 1.0, 5.0, 5.0];
        let t = Tree::fit(&x, &y, &[1.0; 4], &params(Some(3)), None);
        assert_eq!(t.depth(), 1);
        assert_eq!(t.nodes[0], Node::Split { feature: 0, threshold: 1.5, left: 1, right: 2 });
        assert_eq!(t.predict(&[0.2]), 1.0);
        assert_eq!(t.predict(&[2.7]), 5.0);
    }

    #[test]
    fn unlimited_depth_interpolates() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0], [2.0, 3.0], [3.0, 2.0], [4.0, 4.0]]).unwrap();
        let y = [3.0, -1.0, 2.5, 7.0, 0.0];
        let t = Tree::fit(&x, &y, &[1.0; 5], &params(None), None);
        for (row, &v) in x.row_iter().zip(&y) {
            assert_eq!(t.predict(row), v);
        }
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // both columns separate the targets identically
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let t = Tree::fit(&x, &[0.0, 1.0], &[1.0, 1.0], &params(Some(1)), None);
        assert!(matches!(t.nodes[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn gini_matches_variance_on_binary_targets() {
        let x = Matrix::from_rows(&[[0.1], [0.4], [0.5], [0.9], [1.3], [2.0]]).unwrap();
        let y = [0.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let mut p = params(Some(2));
        let a = Tree::fit(&x, &y, &[1.0; 6], &p, None);
        p.criterion = Criterion::Gini;
        let b = Tree::fit(&x, &y, &[1.0; 6], &p, None);
        assert_eq!(a.nodes, b.nodes);
    }
}
