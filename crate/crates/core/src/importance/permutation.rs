use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learners::TrainedModel;
use crate::scalar::Scalar;

/// Relative floor on the baseline error, against a perfect model.
const BASELINE_FLOOR: f64 = 1e-12;

fn mse_per_target<T: Scalar>(truth: &Array2<T>, pred: &Array2<T>) -> Vec<(f64, usize)> {
    (0..truth.ncols())
        .map(|k| {
            let mut se = 0.0;
            let mut n = 0;
            for (t, p) in truth.column(k).iter().zip(pred.column(k)) {
                if !t.is_nan() {
                    let e = p.as_f64() - t.as_f64();
                    se += e * e;
                    n += 1;
                }
            }
            (if n > 0 { se / n as f64 } else { 0.0 }, n)
        })
        .collect()
}

/// `scores[target][feature]`: mean over `repeats` of (permuted error −
/// baseline error) / baseline error, per-target squared error over every row
/// of `ds`. Feature `j` permutes with stream `j` of a generator seeded by
/// `seed`.
pub fn permutation_scores<T: Scalar>(
    model: &TrainedModel<T>,
    ds: &Dataset<T>,
    repeats: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if repeats == 0 {
        return Err(Error::invalid("permutation repeats must be positive"));
    }
    let x = model.align_features(ds)?;
    let base = mse_per_target(&ds.y, &model.predict_x(&x));
    if base.iter().all(|(_, n)| *n == 0) {
        return Err(Error::Empty("no observed targets in the importance subset".into()));
    }
    let denom: Vec<f64> = (0..ds.n_targets())
        .map(|k| {
            let obs: Vec<f64> = ds.y.column(k).iter().filter(|v| !v.is_nan()).map(|v| v.as_f64()).collect();
            let scale = obs.iter().map(|v| v * v).sum::<f64>() / obs.len().max(1) as f64;
            base[k].0.max(BASELINE_FLOOR * scale).max(f64::MIN_POSITIVE)
        })
        .collect();
    let per_feature: Vec<Vec<f64>> = (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let mut acc = vec![0.0; ds.n_targets()];
            let mut xp = x.clone();
            let original: Vec<T> = x.column(j).to_vec();
            for _ in 0..repeats {
                let mut col = original.clone();
                col.shuffle(&mut rng);
                xp.column_mut(j).iter_mut().zip(&col).for_each(|(c, v)| *c = *v);
                let err = mse_per_target(&ds.y, &model.predict_x(&xp));
                for k in 0..acc.len() {
                    if base[k].1 > 0 {
                        acc[k] += (err[k].0 - base[k].0) / denom[k];
                    }
                }
            }
            acc.into_iter().map(|a| a / repeats as f64).collect()
        })
        .collect();
    Ok((0..ds.n_targets())
        .map(|k| per_feature.iter().map(|f| f[k]).collect())
        .collect())
}
