//! Dense matrices, the weighted ridge solver, feature scaling and seeded randomness.

mod matrix;
mod ridge;
mod rng;
mod scale;

pub use matrix::Matrix;
pub use ridge::{weighted_ridge_fit, RidgeSolution, ALPHA_FLOOR};
pub use rng::{RandomSource, Stream, ALGORITHM as RNG_ALGORITHM};
pub use scale::{minmax_fit_transform, one_hot_encode, MinMaxScaler};

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}
