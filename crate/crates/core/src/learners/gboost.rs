//! Per-target gradient boosting of regression trees with squared or
//! quantile (pinball) loss.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Tree, TreeParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::quantile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Loss {
    Squared,
    Quantile { alpha: f64 },
}

impl Loss {
    pub fn validate(&self) -> Result<()> {
        match self {
            Loss::Quantile { alpha } if !(*alpha > 0.0 && *alpha < 1.0) => Err(Error::invalid(format!(
                "quantile alpha must be in (0, 1), got {alpha}"
            ))),
            _ => Ok(()),
        }
    }

    /// Mean loss of predictions `f` against `y`.
    pub fn value<T: Scalar>(&self, y: &[T], f: &[T]) -> T {
        let n = T::of_usize(y.len());
        match *self {
            Loss::Squared => y.iter().zip(f).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / n,
            Loss::Quantile { alpha } => {
                let alpha = T::of(alpha);
                y.iter()
                    .zip(f)
                    .map(|(&a, &b)| {
                        let r = a - b;
                        if r >= T::zero() {
                            alpha * r
                        } else {
                            (alpha - T::one()) * r
                        }
                    })
                    .sum::<T>()
                    / n
            }
        }
    }

    /// Negative gradient at prediction `f`.
    pub fn negative_gradient<T: Scalar>(&self, y: T, f: T) -> T {
        match *self {
            Loss::Squared => y - f,
            Loss::Quantile { alpha } => {
                let alpha = T::of(alpha);
                if y < f {
                    alpha - T::one()
                } else {
                    alpha
                }
            }
        }
    }

    fn initial<T: Scalar>(&self, y: &[T]) -> T {
        match *self {
            Loss::Squared => y.iter().copied().sum::<T>() / T::of_usize(y.len()),
            Loss::Quantile { alpha } => quantile(y, T::of(alpha)).expect("non-empty"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GboostParams {
    pub loss: Loss,
    pub n_rounds: usize,
    pub learning_rate: f64,
    /// `None` grows unbounded trees.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features tried per split; `None` means all.
    pub mtry: Option<usize>,
}

impl Default for GboostParams {
    fn default() -> Self {
        GboostParams {
            loss: Loss::Squared,
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: Some(3),
            min_leaf: 1,
            mtry: None,
        }
    }
}

impl GboostParams {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if self.n_rounds == 0 {
            return Err(Error::invalid("gboost.n_rounds must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::invalid("gboost.learning_rate must be finite and non-negative"));
        }
        if self.mtry == Some(0) {
            return Err(Error::invalid("gboost.mtry must be at least 1"));
        }
        Ok(())
    }
}

/// Boosted trees for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Booster<T: Scalar> {
    pub loss: Loss,
    pub init: T,
    pub learning_rate: T,
    pub trees: Vec<Tree<T>>,
    /// Training loss before the first round and after each round.
    pub loss_history: Vec<T>,
}

impl<T: Scalar> Booster<T> {
    /// Fits on the rows of `x` given by `rows`, with `y[i]` the target of `rows[i]`.
    pub fn fit(x: ArrayView2<T>, rows: &[usize], y: &[T], params: &GboostParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if rows.is_empty() {
            return Err(Error::NoTrainingData);
        }
        let loss = params.loss;
        let lr = T::of(params.learning_rate);
        let xs = x.select(ndarray::Axis(0), rows);
        let n = rows.len();
        let init = loss.initial(y);
        let mut f = vec![init; n];
        let mut history = vec![loss.value(y, &f)];
        let mut trees = Vec::with_capacity(params.n_rounds);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            mtry: params.mtry.unwrap_or(usize::MAX),
        };
        let all: Vec<usize> = (0..n).collect();
        for _ in 0..params.n_rounds {
            let g = Array2::from_shape_fn((n, 1), |(i, _)| loss.negative_gradient(y[i], f[i]));
            let tree = match loss {
                Loss::Squared => {
                    let gv = g.view();
                    grow(xs.view(), gv, all.clone(), tree_params, &mut rng, &|r: &[usize]| {
                        vec![r.iter().map(|&i| gv[[i, 0]]).sum::<T>() / T::of_usize(r.len())]
                    })
                }
                Loss::Quantile { alpha } => {
                    let resid: Vec<T> = y.iter().zip(&f).map(|(&a, &b)| a - b).collect();
                    grow(xs.view(), g.view(), all.clone(), tree_params, &mut rng, &|r: &[usize]| {
                        let vals: Vec<T> = r.iter().map(|&i| resid[i]).collect();
                        vec![quantile(&vals, T::of(alpha)).expect("non-empty leaf")]
                    })
                }
            };
            for (i, fi) in f.iter_mut().enumerate() {
                *fi += lr * tree.predict_row(xs.row(i))[0];
            }
            history.push(loss.value(y, &f));
            trees.push(tree);
        }
        Ok(Booster {
            loss,
            init,
            learning_rate: lr,
            trees,
            loss_history: history,
        })
    }

    pub fn predict_row(&self, row: ArrayView1<T>) -> T {
        let mut f = self.init;
        for tree in &self.trees {
            f += self.learning_rate * tree.predict_row(row)[0];
        }
        f
    }

    pub fn predict(&self, x: ArrayView2<T>) -> Vec<T> {
        x.rows().into_iter().map(|r| self.predict_row(r)).collect()
    }

    /// Negative gradients each tree was fitted to, replayed on `rows` of `x`
    /// with targets `y`: entry `r` holds the values before round `r`.
    pub fn pseudo_residuals(&self, x: ArrayView2<T>, rows: &[usize], y: &[T]) -> Vec<Vec<T>> {
        let mut f = vec![self.init; rows.len()];
        let mut out = Vec::with_capacity(self.trees.len());
        for tree in &self.trees {
            out.push(
                y.iter()
                    .zip(&f)
                    .map(|(&a, &b)| self.loss.negative_gradient(a, b))
                    .collect(),
            );
            for (fi, &r) in f.iter_mut().zip(rows) {
                *fi += self.learning_rate * tree.predict_row(x.row(r))[0];
            }
        }
        out
    }
}
