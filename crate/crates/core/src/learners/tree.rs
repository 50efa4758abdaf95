//! Multi-target regression trees grown by exhaustive variance-reduction
//! split search.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", rename_all = "snake_case")]
pub enum Node<T: Scalar> {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf { value: Vec<T> },
}

/// Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Tree<T: Scalar> {
    pub nodes: Vec<Node<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Candidate features drawn per node.
    pub mtry: usize,
}

impl<T: Scalar> Tree<T> {
    pub fn leaf(value: Vec<T>) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn leaf_index(&self, row: ArrayView1<T>) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict_row(&self, row: ArrayView1<T>) -> &[T] {
        match &self.nodes[self.leaf_index(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn predict(&self, x: ArrayView2<T>) -> Array2<T> {
        let t = self.n_outputs();
        let mut out = Array2::zeros((x.nrows(), t));
        for (i, row) in x.rows().into_iter().enumerate() {
            for (k, v) in self.predict_row(row).iter().enumerate() {
                out[[i, k]] = *v;
            }
        }
        out
    }

    pub fn n_outputs(&self) -> usize {
        self.nodes
            .iter()
            .find_map(|n| match n {
                Node::Leaf { value } => Some(value.len()),
                _ => None,
            })
            .unwrap_or(0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go<T: Scalar>(t: &Tree<T>, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    /// Replaces each leaf value by `f(rows reaching the leaf)`, routing `rows` of `x`.
    pub fn refit_leaves(&mut self, x: ArrayView2<T>, rows: &[usize], f: impl Fn(&[usize]) -> Vec<T>) {
        let mut per_leaf: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for &r in rows {
            per_leaf[self.leaf_index(x.row(r))].push(r);
        }
        for (i, node) in self.nodes.iter_mut().enumerate() {
            if let Node::Leaf { value } = node {
                if !per_leaf[i].is_empty() {
                    *value = f(&per_leaf[i]);
                }
            }
        }
    }
}

/// Per-target means of `y` over `rows`.
pub fn mean_leaf<T: Scalar>(y: ArrayView2<T>, rows: &[usize]) -> Vec<T> {
    let n = T::of_usize(rows.len());
    (0..y.ncols())
        .map(|k| rows.iter().map(|&r| y[[r, k]]).sum::<T>() / n)
        .collect()
}

struct Grower<'a, T: Scalar, R> {
    x: ArrayView2<'a, T>,
    y: ArrayView2<'a, T>,
    params: TreeParams,
    rng: &'a mut R,
    leaf: &'a dyn Fn(&[usize]) -> Vec<T>,
    nodes: Vec<Node<T>>,
}

struct BestSplit<T> {
    feature: usize,
    threshold: T,
    gain: T,
}

/// Grows a tree on `rows` (duplicates allowed, as from a bootstrap sample).
/// `leaf` computes leaf values from the rows reaching a leaf.
pub fn grow<T: Scalar, R: Rng>(
    x: ArrayView2<T>,
    y: ArrayView2<T>,
    rows: Vec<usize>,
    params: TreeParams,
    rng: &mut R,
    leaf: &dyn Fn(&[usize]) -> Vec<T>,
) -> Tree<T> {
    assert!(!rows.is_empty(), "tree needs at least one row");
    let mut g = Grower {
        x,
        y,
        params: TreeParams {
            mtry: params.mtry.clamp(1, x.ncols().max(1)),
            min_leaf: params.min_leaf.max(1),
            ..params
        },
        rng,
        leaf,
        nodes: Vec::new(),
    };
    g.build(rows, 0);
    Tree { nodes: g.nodes }
}

impl<T: Scalar, R: Rng> Grower<'_, T, R> {
    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: Vec::new() });
        let split = if self.params.max_depth.is_some_and(|d| depth >= d)
            || rows.len() < 2 * self.params.min_leaf
            || self.pure(&rows)
        {
            None
        } else {
            self.best_split(&rows)
        };
        match split {
            None => {
                self.nodes[id] = Node::Leaf {
                    value: (self.leaf)(&rows),
                };
            }
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows
                    .into_iter()
                    .partition(|&i| self.x[[i, s.feature]] <= s.threshold);
                let left = self.build(l, depth + 1);
                let right = self.build(r, depth + 1);
                self.nodes[id] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right,
                };
            }
        }
        id
    }

    fn pure(&self, rows: &[usize]) -> bool {
        let first = self.y.row(rows[0]);
        rows.iter().all(|&r| self.y.row(r) == first)
    }

    fn candidates(&mut self) -> Vec<usize> {
        let d = self.x.ncols();
        if self.params.mtry >= d {
            return (0..d).collect();
        }
        let mut f = rand::seq::index::sample(&mut *self.rng, d, self.params.mtry).into_vec();
        f.sort_unstable();
        f
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<BestSplit<T>> {
        let t = self.y.ncols();
        let n = rows.len();
        let min_leaf = self.params.min_leaf;
        let mut total = vec![T::zero(); t];
        let mut sumsq = T::zero();
        for &r in rows {
            for k in 0..t {
                let v = self.y[[r, k]];
                total[k] += v;
                sumsq += v * v;
            }
        }
        let n_t = T::of_usize(n);
        let parent: T = total.iter().map(|&s| s * s).sum::<T>() / n_t;
        let tol = T::epsilon() * T::of(16.0) * sumsq;

        let mut best: Option<BestSplit<T>> = None;
        let mut order = rows.to_vec();
        let mut left = vec![T::zero(); t];
        for j in self.candidates() {
            order.sort_by(|&a, &b| self.x[[a, j]].partial_cmp(&self.x[[b, j]]).expect("NaN feature"));
            left.iter_mut().for_each(|v| *v = T::zero());
            for i in 0..n - 1 {
                let r = order[i];
                for k in 0..t {
                    left[k] += self.y[[r, k]];
                }
                let nl = i + 1;
                let (a, b) = (self.x[[r, j]], self.x[[order[i + 1], j]]);
                if a >= b || nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let (nl_t, nr_t) = (T::of_usize(nl), T::of_usize(n - nl));
                let mut children = T::zero();
                for k in 0..t {
                    let sr = total[k] - left[k];
                    children += left[k] * left[k] / nl_t + sr * sr / nr_t;
                }
                let gain = children - parent;
                if gain > tol && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mid = (a + b) / T::of(2.0);
                    let threshold = if mid >= b { a } else { mid };
                    best = Some(BestSplit {
                        feature: j,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fit(x: &Array2<f64>, y: &Array2<f64>, params: TreeParams) -> Tree<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let yv = y.view();
        grow(x.view(), yv, (0..x.nrows()).collect(), params, &mut rng, &|r: &[usize]| mean_leaf(yv, r))
    }

    const FULL: TreeParams = TreeParams {
        max_depth: None,
        min_leaf: 1,
        mtry: usize::MAX,
    };

    /// Brute force: every threshold between consecutive distinct values.
    fn brute_best(x: &[f64], y: &[f64]) -> (f64, f64) {
        let sse = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|a| (a - m).powi(2)).sum::<f64>()
        };
        let mut vals: Vec<f64> = x.to_vec();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        let mut best = (f64::NEG_INFINITY, 0.0);
        for w in vals.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let l: Vec<f64> = x.iter().zip(y).filter(|(a, _)| **a <= thr).map(|(_, b)| *b).collect();
            let r: Vec<f64> = x.iter().zip(y).filter(|(a, _)| **a > thr).map(|(_, b)| *b).collect();
            let gain = sse(y) - sse(&l) - sse(&r);
            if gain > best.0 + 1e-12 {
                best = (gain, thr);
            }
        }
        best
    }

    #[test]
    fn step_function_split_matches_brute_force() {
        let xs: Vec<f64> = (-10..10).map(|i| i as f64 + 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|&v| f64::from(u8::from(v > 0.0))).collect();
        let x = Array2::from_shape_vec((20, 1), xs.clone()).unwrap();
        let y = Array2::from_shape_vec((20, 1), ys.clone()).unwrap();
        let t = fit(&x, &y, FULL);
        let (_, thr) = brute_best(&xs, &ys);
        match &t.nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(*threshold, thr),
            _ => panic!("expected split"),
        }
        assert_eq!(thr, 0.0);
        assert_eq!(t.predict(x.view()), y);
    }

    #[test]
    fn constant_target_is_single_leaf() {
        let x = array![[1.0], [2.0], [3.0]];
        let y = array![[4.0, 1.0], [4.0, 1.0], [4.0, 1.0]];
        let t = fit(&x, &y, FULL);
        assert_eq!(t.nodes, vec![Node::Leaf { value: vec![4.0, 1.0] }]);
    }

    #[test]
    fn memorizes_distinct_rows() {
        let x = array![[0.3, 1.0], [0.1, 2.0], [0.2, 0.5], [0.9, 0.1]];
        let y = array![[1.0, 5.0], [2.0, -1.0], [3.0, 0.0], [4.0, 2.0]];
        assert_eq!(fit(&x, &y, FULL).predict(x.view()), y);
    }

    #[test]
    fn ties_prefer_lower_feature_index() {
        // both columns separate the targets identically
        let x = array![[0.0, 0.0], [1.0, 1.0]];
        let y = array![[0.0], [1.0]];
        match &fit(&x, &y, FULL).nodes[0] {
            Node::Split { feature, .. } => assert_eq!(*feature, 0),
            _ => panic!(),
        }
    }

    #[test]
    fn min_leaf_at_least_n_gives_stump() {
        let x = array![[0.0], [1.0], [2.0]];
        let y = array![[0.0], [1.0], [5.0]];
        let t = fit(&x, &y, TreeParams { min_leaf: 3, ..FULL });
        assert_eq!(t.n_leaves(), 1);
        assert_eq!(t.predict_row(x.row(0)), &[2.0]);
    }

    #[test]
    fn midpoint_guard_for_adjacent_floats() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let x = array![[a], [b]];
        let y = array![[0.0], [1.0]];
        let t = fit(&x, &y, FULL);
        assert_eq!(t.predict(x.view()), y);
    }

    #[test]
    fn depth_limit() {
        let x = Array2::from_shape_fn((16, 1), |(i, _)| i as f64);
        let y = Array2::from_shape_fn((16, 1), |(i, _)| (i * i) as f64);
        let t = fit(&x, &y, TreeParams { max_depth: Some(2), ..FULL });
        assert!(t.depth() <= 2);
        assert!(t.n_leaves() <= 4);
    }
}
