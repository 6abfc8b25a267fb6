use serde::{Deserialize, Serialize};

use super::{Dataset, Task};
use crate::numerics::{Matrix, RandomSource, Stream};

/// Dimensionality of every synthetic generator.
pub const SYN_DIM: usize = 11;

const X10: usize = 9;
const X11: usize = 10;

/// Piecewise-linear generators whose local dynamics switch across a boundary
/// in (X10, X11). Left of the boundary `y = X1 + 2·X2`, right of it `y = X3 + 2·X4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    Syn1,
    Syn2,
    Syn3,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 3] = [SyntheticKind::Syn1, SyntheticKind::Syn2, SyntheticKind::Syn3];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::Syn1 => "syn1",
            SyntheticKind::Syn2 => "syn2",
            SyntheticKind::Syn3 => "syn3",
        }
    }

    /// Signed distance-like statistic; the right-hand regime is `stat ≥ 0`.
    pub fn boundary_statistic(self, x: &[f64]) -> f64 {
        match self {
            SyntheticKind::Syn1 => x[X10],
            SyntheticKind::Syn2 => x[X10] + x[X11].exp() - 1.0,
            SyntheticKind::Syn3 => x[X10] + x[X11].powi(3),
        }
    }

    pub fn in_right_regime(self, x: &[f64]) -> bool {
        self.boundary_statistic(x) >= 0.0
    }

    /// Ground-truth local coefficients at `x`.
    pub fn true_coefficients(self, x: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; SYN_DIM];
        if self.in_right_regime(x) {
            w[2] = 1.0;
            w[3] = 2.0;
        } else {
            w[0] = 1.0;
            w[1] = 2.0;
        }
        w
    }

    pub fn label(self, x: &[f64]) -> f64 {
        if self.in_right_regime(x) {
            x[2] + 2.0 * x[3]
        } else {
            x[0] + 2.0 * x[1]
        }
    }
}

impl std::str::FromStr for SyntheticKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "syn1" => Ok(SyntheticKind::Syn1),
            "syn2" => Ok(SyntheticKind::Syn2),
            "syn3" => Ok(SyntheticKind::Syn3),
            other => Err(crate::Error::Config(format!("unknown synthetic dataset `{other}`"))),
        }
    }
}

/// `n` rows of i.i.d. standard normal features in 11 dimensions, labelled by `kind`.
pub fn gen_syn(kind: SyntheticKind, n: usize, seed: u64) -> Dataset {
    let mut rng = RandomSource::new(seed).derive(Stream::Data);
    let mut data = Vec::with_capacity(n * SYN_DIM);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let start = data.len();
        for _ in 0..SYN_DIM {
            data.push(rng.standard_normal());
        }
        labels.push(kind.label(&data[start..]));
    }
    Dataset {
        features: Matrix::new(n, SYN_DIM, data).expect("normal draws are finite"),
        labels,
        feature_names: (1..=SYN_DIM).map(|i| format!("X{i}")).collect(),
        task: Task::Regression,
        synthetic: Some(kind),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(entries: &[(usize, f64)]) -> Vec<f64> {
        let mut x = vec![0.0; SYN_DIM];
        for &(i, v) in entries {
            x[i - 1] = v;
        }
        x
    }

    #[test]
    fn branch_rules() {
        let x = point(&[(1, 1.0), (2, 1.0), (10, -1.0)]);
        assert_eq!(SyntheticKind::Syn1.label(&x), 3.0);
        let x = point(&[(3, 1.0), (4, 1.0), (10, 1.0)]);
        assert_eq!(SyntheticKind::Syn1.label(&x), 3.0);
        // X10 + e^X11 = 1 sits on the right-hand side of the boundary
        let x = point(&[(3, 2.0), (4, 1.0)]);
        assert_eq!(SyntheticKind::Syn2.label(&x), 4.0);
        assert_eq!(SyntheticKind::Syn2.true_coefficients(&x)[2..4], [1.0, 2.0]);
    }

    #[test]
    fn generated_labels_follow_rule() {
        for kind in SyntheticKind::ALL {
            let ds = gen_syn(kind, 200, 5);
            assert_eq!(ds.dim(), 11);
            for (row, &y) in ds.features.row_iter().zip(&ds.labels) {
                assert_eq!(y, kind.label(row));
            }
        }
    }

    #[test]
    fn reproducible() {
        let a = gen_syn(SyntheticKind::Syn3, 50, 9);
        let b = gen_syn(SyntheticKind::Syn3, 50, 9);
        assert_eq!(a.features.data(), b.features.data());
        assert_ne!(a.features.data(), gen_syn(SyntheticKind::Syn3, 50, 10).features.data());
    }
}
