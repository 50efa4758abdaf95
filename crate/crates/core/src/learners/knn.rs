//! k-nearest-neighbour regression on standardized features.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    InverseDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
    pub weighting: Weighting,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k: 5,
            weighting: Weighting::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Knn<T: Scalar> {
    pub k: usize,
    pub weighting: Weighting,
    pub x: Array2<T>,
    pub y: Array2<T>,
}

impl<T: Scalar> Knn<T> {
    pub fn fit(x: ArrayView2<T>, y: ArrayView2<T>, params: &KnnParams) -> Result<Self> {
        if params.k == 0 {
            return Err(Error::invalid("knn.k must be positive"));
        }
        if params.k > x.nrows() {
            return Err(Error::invalid(format!(
                "knn.k = {} exceeds the {} learning rows",
                params.k,
                x.nrows()
            )));
        }
        Ok(Knn {
            k: params.k,
            weighting: params.weighting,
            x: x.to_owned(),
            y: y.to_owned(),
        })
    }

    /// Indices and distances of the k nearest rows; ties broken by lower index.
    pub fn neighbours(&self, q: ArrayView1<T>) -> Vec<(usize, T)> {
        let mut d: Vec<(usize, T)> = self
            .x
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let s: T = r.iter().zip(q.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum();
                (i, s.sqrt())
            })
            .collect();
        d.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("NaN distance").then(a.0.cmp(&b.0)));
        d.truncate(self.k);
        d
    }

    pub fn predict(&self, x: ArrayView2<T>) -> Array2<T> {
        let t = self.y.ncols();
        let mut out = Array2::zeros((x.nrows(), t));
        for (i, q) in x.rows().into_iter().enumerate() {
            let nb = self.neighbours(q);
            let exact: Vec<usize> = nb.iter().filter(|(_, d)| *d == T::zero()).map(|p| p.0).collect();
            let weights: Vec<(usize, T)> = match self.weighting {
                Weighting::Uniform => nb.iter().map(|&(j, _)| (j, T::one())).collect(),
                Weighting::InverseDistance if !exact.is_empty() => {
                    exact.iter().map(|&j| (j, T::one())).collect()
                }
                Weighting::InverseDistance => nb.iter().map(|&(j, d)| (j, T::one() / d)).collect(),
            };
            let total: T = weights.iter().map(|w| w.1).sum();
            for k in 0..t {
                out[[i, k]] = weights.iter().map(|&(j, w)| w * self.y[[j, k]]).sum::<T>() / total;
            }
        }
        out
    }
}
