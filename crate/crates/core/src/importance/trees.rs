use ndarray::{Array2, ArrayView2};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learners::tree::{Node, Tree};
use crate::learners::{Fitted, TrainedModel};
use crate::scalar::Scalar;

/// Calls `visit(node feature, rows reaching the node)` for every split node
/// reached by at least one of `rows`.
fn walk<T: Scalar>(tree: &Tree<T>, x: ArrayView2<T>, rows: Vec<usize>, visit: &mut impl FnMut(usize, &[usize], &[usize])) {
    let mut stack = vec![(0usize, rows)];
    while let Some((id, rows)) = stack.pop() {
        if rows.is_empty() {
            continue;
        }
        if let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = &tree.nodes[id]
        {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[[i, *feature]] <= *threshold);
            visit(*feature, &l, &r);
            stack.push((*right, r));
            stack.push((*left, l));
        }
    }
}

/// Realized variance-reduction mass (nL·nR/N)(μL − μR)² of `values` at a split.
fn reduction(values: &[f64], left: &[usize], right: &[usize]) -> f64 {
    let obs = |rows: &[usize]| {
        let v: Vec<f64> = rows.iter().map(|&i| values[i]).filter(|v| !v.is_nan()).collect();
        let n = v.len();
        (n, if n > 0 { v.iter().sum::<f64>() / n as f64 } else { 0.0 })
    };
    let (nl, ml) = obs(left);
    let (nr, mr) = obs(right);
    if nl == 0 || nr == 0 {
        return 0.0;
    }
    (nl * nr) as f64 / (nl + nr) as f64 * (ml - mr).powi(2)
}

fn tree_inputs<T: Scalar>(model: &TrainedModel<T>, ds: &Dataset<T>) -> Result<(Array2<T>, Array2<f64>)> {
    if !model.spec.learner.is_tree_ensemble() {
        return Err(Error::RequiresTreeEnsemble);
    }
    let xs = model.scaled_features(ds)?;
    let ys = model.scaler.y.apply(&ds.y).mapv(|v| v.as_f64());
    Ok((xs, ys))
}

/// GENIE3: per target, (1/#trees) Σ over split nodes on each feature of
/// N(node)·ΔVar(node) on the rows of `ds` with that target observed,
/// in standardized target units. Boosted trees are scored against the
/// replayed pseudo-residuals they were fitted to.
pub fn genie3_scores<T: Scalar>(model: &TrainedModel<T>, ds: &Dataset<T>) -> Result<Vec<Vec<f64>>> {
    let (xs, ys) = tree_inputs(model, ds)?;
    let d = model.feature_names.len();
    let t = model.n_targets();
    let mut scores = vec![vec![0.0; d]; t];
    let n = xs.nrows();
    match &model.fitted {
        Fitted::Forest(forest) => {
            let cols: Vec<Vec<f64>> = (0..t).map(|k| ys.column(k).to_vec()).collect();
            for tree in &forest.trees {
                walk(tree, xs.view(), (0..n).collect(), &mut |j, l, r| {
                    for k in 0..t {
                        scores[k][j] += reduction(&cols[k], l, r);
                    }
                });
            }
            let m = forest.trees.len() as f64;
            scores.iter_mut().flatten().for_each(|s| *s /= m);
        }
        Fitted::Gboost { boosters } => {
            for (k, booster) in boosters.iter().enumerate() {
                let rows: Vec<usize> = (0..n).filter(|&i| !ys[[i, k]].is_nan()).collect();
                let yk: Vec<T> = rows.iter().map(|&i| T::of(ys[[i, k]])).collect();
                let residuals = booster.pseudo_residuals(xs.view(), &rows, &yk);
                // values indexed by dataset row
                let mut vals = vec![f64::NAN; n];
                for (tree, res) in booster.trees.iter().zip(&residuals) {
                    for (&i, v) in rows.iter().zip(res) {
                        vals[i] = v.as_f64();
                    }
                    walk(tree, xs.view(), rows.clone(), &mut |j, l, r| {
                        scores[k][j] += reduction(&vals, l, r);
                    });
                }
                let m = booster.trees.len() as f64;
                scores[k].iter_mut().for_each(|s| *s /= m);
            }
        }
        _ => return Err(Error::RequiresTreeEnsemble),
    }
    Ok(scores)
}

/// Symbolic: per target, (1/#trees) Σ over split nodes on each feature of
/// N(node)/N(root), counting the rows of `ds`.
pub fn symbolic_scores<T: Scalar>(model: &TrainedModel<T>, ds: &Dataset<T>) -> Result<Vec<Vec<f64>>> {
    let (xs, _) = tree_inputs(model, ds)?;
    let d = model.feature_names.len();
    let t = model.n_targets();
    let n = xs.nrows();
    let root = n as f64;
    let tree_sum = |trees: &[Tree<T>]| {
        let mut s = vec![0.0; d];
        for tree in trees {
            walk(tree, xs.view(), (0..n).collect(), &mut |j, l, r| {
                s[j] += (l.len() + r.len()) as f64 / root;
            });
        }
        s.iter_mut().for_each(|v| *v /= trees.len() as f64);
        s
    };
    match &model.fitted {
        Fitted::Forest(forest) => Ok(vec![tree_sum(&forest.trees); t]),
        Fitted::Gboost { boosters } => Ok(boosters.iter().map(|b| tree_sum(&b.trees)).collect()),
        _ => Err(Error::RequiresTreeEnsemble),
    }
}
