//! Random forest of multi-target regression trees.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, mean_leaf, Tree, TreeParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per split; `None` means max(1, d/3).
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    /// Sample with replacement; otherwise a without-replacement subsample.
    pub bootstrap: bool,
    /// Sample size as a fraction of the learning set.
    pub bag_fraction: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            mtry: None,
            min_leaf: 1,
            max_depth: None,
            bootstrap: true,
            bag_fraction: 1.0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("forest.n_trees must be at least 1"));
        }
        if self.mtry == Some(0) {
            return Err(Error::invalid("forest.mtry must be at least 1"));
        }
        if !(self.bag_fraction > 0.0 && self.bag_fraction <= 1.0) {
            return Err(Error::invalid("forest.bag_fraction must be in (0, 1]"));
        }
        Ok(())
    }

    pub fn mtry_for(&self, d: usize) -> usize {
        self.mtry.unwrap_or((d / 3).max(1)).min(d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Forest<T: Scalar> {
    pub trees: Vec<Tree<T>>,
}

/// Rows drawn for one tree.
fn sample_rows(n: usize, params: &ForestParams, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let m = ((params.bag_fraction * n as f64).round() as usize).clamp(1, n);
    if params.bootstrap {
        (0..m).map(|_| rng.random_range(0..n)).collect()
    } else if m == n {
        (0..n).collect()
    } else {
        let mut rows = rand::seq::index::sample(rng, n, m).into_vec();
        rows.sort_unstable();
        rows
    }
}

impl<T: Scalar> Forest<T> {
    /// Fits on standardized, fully observed `x` and `y`. Tree `i` uses the
    /// generator seeded with `seed + i`, so the result does not depend on
    /// the thread schedule.
    pub fn fit(x: ArrayView2<T>, y: ArrayView2<T>, params: &ForestParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if x.nrows() == 0 {
            return Err(Error::NoTrainingData);
        }
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            mtry: params.mtry_for(x.ncols()),
        };
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
                let rows = sample_rows(x.nrows(), params, &mut rng);
                grow(x, y, rows, tree_params, &mut rng, &|r: &[usize]| mean_leaf(y, r))
            })
            .collect();
        Ok(Forest { trees })
    }

    /// Mean of the tree predictions.
    pub fn predict(&self, x: ArrayView2<T>) -> Array2<T> {
        let mut sum = self.trees[0].predict(x);
        for tree in &self.trees[1..] {
            sum += &tree.predict(x);
        }
        sum / T::of_usize(self.trees.len())
    }
}
