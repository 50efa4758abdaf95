//! Per-column standardization fitted on the learning set.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metafile::sha256_hex;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ColumnStats<T: Scalar> {
    pub mean: Vec<T>,
    /// Population standard deviation; 1 for pass-through columns.
    pub std: Vec<T>,
    /// Constant (or unobserved) columns are passed through unscaled.
    pub pass_through: Vec<bool>,
}

impl<T: Scalar> ColumnStats<T> {
    /// Statistics over the observed (non-NaN) values of each column.
    pub fn fit(m: &Array2<T>) -> Self {
        let mut mean = Vec::with_capacity(m.ncols());
        let mut std = Vec::with_capacity(m.ncols());
        let mut pass = Vec::with_capacity(m.ncols());
        for col in m.axis_iter(Axis(1)) {
            let obs: Vec<T> = col.iter().copied().filter(|v| !v.is_nan()).collect();
            if obs.is_empty() {
                mean.push(T::zero());
                std.push(T::one());
                pass.push(true);
                continue;
            }
            let n = T::of_usize(obs.len());
            let mu = obs.iter().copied().sum::<T>() / n;
            let var = obs.iter().map(|&v| (v - mu) * (v - mu)).sum::<T>() / n;
            let (lo, hi) = obs
                .iter()
                .fold((obs[0], obs[0]), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            mean.push(mu);
            if lo == hi || var <= T::zero() {
                std.push(T::one());
                pass.push(true);
            } else {
                std.push(var.sqrt());
                pass.push(false);
            }
        }
        ColumnStats {
            mean,
            std,
            pass_through: pass,
        }
    }

    pub fn apply(&self, m: &Array2<T>) -> Array2<T> {
        let mut out = m.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            if !self.pass_through[j] {
                col.mapv_inplace(|v| (v - self.mean[j]) / self.std[j]);
            }
        }
        out
    }

    pub fn invert(&self, m: &Array2<T>) -> Array2<T> {
        let mut out = m.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            if !self.pass_through[j] {
                col.mapv_inplace(|v| v * self.std[j] + self.mean[j]);
            }
        }
        out
    }

    /// Column mean in the scaled space (0 for scaled columns).
    pub fn scaled_mean(&self, j: usize) -> T {
        if self.pass_through[j] {
            self.mean[j]
        } else {
            T::zero()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Scaler<T: Scalar> {
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub x: ColumnStats<T>,
    pub y: ColumnStats<T>,
}

impl<T: Scalar> Scaler<T> {
    pub fn fit(ds: &Dataset<T>) -> Result<Self> {
        if ds.n_rows() == 0 {
            return Err(Error::Empty("cannot fit a scaler on an empty learning set".into()));
        }
        Ok(Scaler {
            feature_names: ds.feature_names(),
            target_names: ds.targets.clone(),
            x: ColumnStats::fit(&ds.x),
            y: ColumnStats::fit(&ds.y),
        })
    }

    /// Identity statistics (every column passed through).
    pub fn identity(feature_names: Vec<String>, target_names: Vec<String>) -> Self {
        let id = |n: usize| ColumnStats {
            mean: vec![T::zero(); n],
            std: vec![T::one(); n],
            pass_through: vec![true; n],
        };
        Scaler {
            x: id(feature_names.len()),
            y: id(target_names.len()),
            feature_names,
            target_names,
        }
    }

    fn check(&self, ds: &Dataset<T>) -> Result<()> {
        if ds.feature_names() != self.feature_names || ds.targets != self.target_names {
            return Err(Error::invalid("scaler was fitted on different columns"));
        }
        Ok(())
    }

    /// Standardizes X and Y of a dataset with matching columns.
    pub fn apply(&self, ds: &Dataset<T>) -> Result<Dataset<T>> {
        self.check(ds)?;
        Ok(Dataset {
            x: self.x.apply(&ds.x),
            y: self.y.apply(&ds.y),
            ..ds.clone()
        })
    }

    /// Maps standardized predictions back to the original target scale.
    pub fn invert(&self, y: &Array2<T>) -> Array2<T> {
        self.y.invert(y)
    }

    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("scaler serializes"))
    }
}

/// Fills missing X cells of an already standardized matrix with the
/// learning-set column means.
pub fn impute_scaled<T: Scalar>(x: &mut Array2<T>, stats: &ColumnStats<T>) {
    for (j, mut col) in x.axis_iter_mut(Axis(1)).enumerate() {
        let fill = stats.scaled_mean(j);
        col.mapv_inplace(|v| if v.is_nan() { fill } else { v });
    }
}

/// Fills missing X cells (original scale) with the learning-set means.
pub fn impute_missing<T: Scalar>(ds: &Dataset<T>, scaler: &Scaler<T>) -> Result<Dataset<T>> {
    scaler.check(ds)?;
    let mut x = ds.x.clone();
    for (j, mut col) in x.axis_iter_mut(Axis(1)).enumerate() {
        let fill = scaler.x.mean[j];
        col.mapv_inplace(|v| if v.is_nan() { fill } else { v });
    }
    Ok(Dataset { x, ..ds.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Feature;
    use ndarray::array;

    fn ds(x: Array2<f64>) -> Dataset<f64> {
        let n = x.nrows();
        let features = (0..x.ncols()).map(|j| Feature::new(format!("f{j}"), "A")).collect();
        Dataset::new(features, vec!["y".into()], x, Array2::zeros((n, 1)), (0..n as i64).collect()).unwrap()
    }

    #[test]
    fn population_std() {
        let s = Scaler::fit(&ds(array![[1.0], [2.0], [3.0]])).unwrap();
        assert_eq!(s.x.mean[0], 2.0);
        assert!((s.x.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let scaled = s.apply(&ds(array![[1.0], [2.0], [3.0]])).unwrap();
        assert!(scaled.x.sum().abs() < 1e-12);
    }

    #[test]
    fn constant_column_passes_through() {
        let d = ds(array![[5.0, 1.0], [5.0, 2.0]]);
        let s = Scaler::fit(&d).unwrap();
        let a = s.apply(&d).unwrap();
        assert_eq!(a.x.column(0).to_vec(), vec![5.0, 5.0]);
    }

    #[test]
    fn round_trip() {
        let y = array![[1.5f64, -3.0], [2.0, 7.0], [9.0, 0.25]];
        let stats = ColumnStats::fit(&y);
        let back = stats.invert(&stats.apply(&y));
        for (a, b) in y.iter().zip(back.iter()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn mismatched_columns_rejected() {
        let s = Scaler::fit(&ds(array![[1.0], [2.0]])).unwrap();
        assert!(s.apply(&ds(array![[1.0, 2.0], [2.0, 3.0]])).is_err());
    }

    #[test]
    fn imputes_learning_means() {
        let learn = ds(array![[0.2], [0.6]]);
        let s = Scaler::fit(&learn).unwrap();
        let test = ds(array![[f64::NAN], [10.0]]);
        let filled = impute_missing(&test, &s).unwrap();
        assert!((filled.x[[0, 0]] - 0.4).abs() < 1e-15);
        assert_eq!(filled.x[[1, 0]], 10.0);
        assert_eq!(impute_missing(&learn, &s).unwrap(), learn);
    }
}
