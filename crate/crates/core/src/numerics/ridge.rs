//! Weighted ridge regression via the normal equations.
//!
//! The intercept is left out of the penalty: both sides are centred on the
//! weighted means, the centred system `(XᵀWX + αI)β = XᵀWy` is solved with a
//! Cholesky factorisation, and the intercept is recovered as `ȳ − x̄ᵀβ`.
//! Cost is `O(d²N + d³)`.

use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{check_same_len, Error, Result};

/// Penalty used when the unregularised normal matrix is singular.
pub const ALPHA_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeSolution {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Penalty actually applied; differs from the requested one only when the
    /// floor kicked in.
    pub alpha_used: f64,
}

impl RidgeSolution {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }
}

/// Minimises `Σ wᵢ(yᵢ − xᵢβ − b)² + α‖β‖²`.
pub fn weighted_ridge_fit(x: &Matrix, y: &[f64], w: &[f64], alpha: f64) -> Result<RidgeSolution> {
    let n = x.rows();
    let d = x.cols();
    if n == 0 {
        return Err(Error::invalid("weighted ridge needs at least one row"));
    }
    check_same_len(n, y.len())?;
    check_same_len(n, w.len())?;
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::invalid(format!("ridge penalty must be finite and nonnegative, got {alpha}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite target"));
    }
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateWeights("all weights are zero".into()));
    }

    let mut x_mean = vec![0.0; d];
    let mut y_mean = 0.0;
    for ((row, &yi), &wi) in x.row_iter().zip(y).zip(w) {
        if wi == 0.0 {
            continue;
        }
        for (m, v) in x_mean.iter_mut().zip(row) {
            *m += wi * v;
        }
        y_mean += wi * yi;
    }
    x_mean.iter_mut().for_each(|m| *m /= total);
    y_mean /= total;

    // Upper triangle of the centred Gram matrix plus the right-hand side.
    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut centred = vec![0.0; d];
    for ((row, &yi), &wi) in x.row_iter().zip(y).zip(w) {
        if wi == 0.0 {
            continue;
        }
        for ((c, v), m) in centred.iter_mut().zip(row).zip(&x_mean) {
            *c = v - m;
        }
        let yc = yi - y_mean;
        for a in 0..d {
            let wa = wi * centred[a];
            rhs[a] += wa * yc;
            let g = &mut gram[a * d..(a + 1) * d];
            for b in a..d {
                g[b] += wa * centred[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            gram[a * d + b] = gram[b * d + a];
        }
    }

    let mut alpha_used = alpha;
    let beta = loop {
        match solve_spd(&gram, &rhs, d, alpha_used) {
            Some(beta) => break beta,
            None => {
                // Singular normal matrix: apply the floor, escalating only if
                // the factorisation still breaks down in floating point.
                alpha_used = if alpha_used < ALPHA_FLOOR {
                    ALPHA_FLOOR
                } else {
                    alpha_used * 10.0
                };
                if alpha_used > 1e6 {
                    return Err(Error::invalid("normal equations could not be factorised"));
                }
            }
        }
    };
    let intercept = y_mean - beta.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    if !intercept.is_finite() || beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::invalid("ridge solution is not finite"));
    }
    Ok(RidgeSolution {
        coefficients: beta,
        intercept,
        alpha_used,
    })
}

/// Solves `(G + αI)β = r` by Cholesky. Returns `None` on a non-positive pivot
/// (relative to the largest diagonal entry).
fn solve_spd(gram: &[f64], rhs: &[f64], d: usize, alpha: f64) -> Option<Vec<f64>> {
    if d == 0 {
        return Some(Vec::new());
    }
    let mut l = vec![0.0; d * d];
    let scale = (0..d).map(|i| gram[i * d + i]).fold(0.0_f64, f64::max) + alpha;
    let tol = if alpha > 0.0 { 0.0 } else { 1e-12 * scale.max(f64::MIN_POSITIVE) };
    for i in 0..d {
        for j in 0..=i {
            let mut s = gram[i * d + j];
            if i == j {
                s += alpha;
            }
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > tol) {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    let mut z = vec![0.0; d];
    for i in 0..d {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[i * d + k] * z[k];
        }
        z[i] = s / l[i * d + i];
    }
    let mut beta = vec![0.0; d];
    for i in (0..d).rev() {
        let mut s = z[i];
        for k in i + 1..d {
            s -= l[k * d + i] * beta[k];
        }
        beta[i] = s / l[i * d + i];
    }
    Some(beta)
}
