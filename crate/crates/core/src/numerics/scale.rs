use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Per-column min-max scaler. Columns whose training range is empty map to 0.
/// Values outside the fitted range are not clipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(x: &Matrix) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::invalid("cannot fit a scaler on an empty matrix"));
        }
        let mut min = vec![f64::INFINITY; x.cols()];
        let mut max = vec![f64::NEG_INFINITY; x.cols()];
        for row in x.row_iter() {
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::invalid("non-finite entry"));
                }
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        Ok(MinMaxScaler { min, max })
    }

    /// Identity scaler over `d` columns: bounds (0, 1).
    pub fn identity(d: usize) -> Self {
        MinMaxScaler {
            min: vec![0.0; d],
            max: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    #[inline]
    pub fn scale_value(&self, c: usize, v: f64) -> f64 {
        let range = self.max[c] - self.min[c];
        if range > 0.0 {
            (v - self.min[c]) / range
        } else {
            0.0
        }
    }

    #[inline]
    pub fn unscale_value(&self, c: usize, v: f64) -> f64 {
        let range = self.max[c] - self.min[c];
        if range > 0.0 {
            self.min[c] + v * range
        } else {
            self.min[c]
        }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(c, &v)| self.scale_value(c, v)).collect()
    }

    pub fn inverse_transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(c, &v)| self.unscale_value(c, v)).collect()
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.dim() {
            return Err(Error::invalid(format!(
                "scaler fitted on {} columns, got {}",
                self.dim(),
                x.cols()
            )));
        }
        let mut data = Vec::with_capacity(x.data().len());
        for row in x.row_iter() {
            data.extend(row.iter().enumerate().map(|(c, &v)| self.scale_value(c, v)));
        }
        Matrix::new(x.rows(), x.cols(), data)
    }

    pub fn inverse_transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.dim() {
            return Err(Error::invalid("column count differs from the fitted scaler"));
        }
        let mut data = Vec::with_capacity(x.data().len());
        for row in x.row_iter() {
            data.extend(row.iter().enumerate().map(|(c, &v)| self.unscale_value(c, v)));
        }
        Matrix::new(x.rows(), x.cols(), data)
    }
}

pub fn minmax_fit_transform(x: &Matrix) -> Result<(MinMaxScaler, Matrix)> {
    let scaler = MinMaxScaler::fit(x)?;
    let scaled = scaler.transform(x)?;
    Ok((scaler, scaled))
}

/// One column per vocabulary entry. Values outside the vocabulary give an
/// all-zero row.
pub fn one_hot_encode<S: AsRef<str>, V: AsRef<str>>(column: &[S], vocabulary: &[V]) -> Result<Matrix> {
    if vocabulary.is_empty() {
        return Err(Error::invalid("one-hot vocabulary is empty"));
    }
    for (i, v) in vocabulary.iter().enumerate() {
        if vocabulary[..i].iter().any(|u| u.as_ref() == v.as_ref()) {
            return Err(Error::invalid(format!("duplicate vocabulary entry `{}`", v.as_ref())));
        }
    }
    let k = vocabulary.len();
    let mut data = vec![0.0; column.len() * k];
    for (r, value) in column.iter().enumerate() {
        if let Some(c) = vocabulary.iter().position(|v| v.as_ref() == value.as_ref()) {
            data[r * k + c] = 1.0;
        }
    }
    Matrix::new(column.len(), k, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_scaling() {
        let x = Matrix::from_rows(&[[0.0, 3.0], [5.0, 3.0], [10.0, 3.0]]).unwrap();
        let (scaler, t) = minmax_fit_transform(&x).unwrap();
        assert_eq!(t.column(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(t.column(1), vec![0.0, 0.0, 0.0]);
        // held-out value beyond the fitted range is not clipped
        assert_eq!(scaler.scale_value(0, 20.0), 2.0);
    }

    #[test]
    fn idempotent_on_unit_bounds() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [0.25, 0.0], [1.0, 0.5]]).unwrap();
        let (_, t) = minmax_fit_transform(&x).unwrap();
        assert_eq!(t, x);
    }

    #[test]
    fn rejects_empty() {
        assert!(MinMaxScaler::fit(&Matrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn one_hot_known_and_unknown() {
        let m = one_hot_encode(&["a", "b", "a"], &["a", "b"]).unwrap();
        assert_eq!(m.data(), &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let m = one_hot_encode(&["c"], &["a", "b"]).unwrap();
        assert_eq!(m.data(), &[0.0, 0.0]);
        assert!(one_hot_encode(&["a"], &["a", "a"]).is_err());
    }

    #[test]
    fn one_hot_vocabulary_from_training_split() {
        // training split only ever saw "red" and "blue"; "green" shows up at test time
        let train = ["red", "blue", "red"];
        let mut vocab: Vec<&str> = Vec::new();
        for v in train {
            if !vocab.contains(&v) {
                vocab.push(v);
            }
        }
        let test = one_hot_encode(&["green", "blue", "green"], &vocab).unwrap();
        assert_eq!(test.data(), &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }
}
