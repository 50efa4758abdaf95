//! Fully connected network trained by mini-batch gradient descent on the
//! mean squared error of standardized targets.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative given the pre-activation `z`.
    fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                T::one() - t * t
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FcnnParams {
    /// Hidden layer widths; empty gives an affine model.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
}

impl Default for FcnnParams {
    fn default() -> Self {
        FcnnParams {
            hidden: vec![64, 64],
            activation: Activation::Relu,
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
        }
    }
}

impl FcnnParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::invalid("fcnn hidden layers must be non-empty"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("fcnn epochs and batch_size must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("fcnn learning_rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Network<T: Scalar> {
    pub activation: Activation,
    /// `weights[l]` is out x in.
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
    /// Training-set loss after each epoch.
    pub loss_history: Vec<T>,
}

struct Grads<T> {
    w: Vec<Array2<T>>,
    b: Vec<Array1<T>>,
}

impl<T: Scalar> Network<T> {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(sizes: &[usize], activation: Activation, rng: &mut R) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(Array2::from_shape_simple_fn((fan_out, fan_in), || {
                T::of(rng.random_range(-limit..limit))
            }));
            biases.push(Array1::zeros(fan_out));
        }
        Network {
            activation,
            weights,
            biases,
            loss_history: Vec::new(),
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.weights.last().expect("layers").nrows()
    }

    /// Pre-activations of every layer (the last one is the output).
    fn forward_all(&self, x: ArrayView2<T>) -> Vec<Array2<T>> {
        let mut zs: Vec<Array2<T>> = Vec::with_capacity(self.weights.len());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let a = if l == 0 {
                x.to_owned()
            } else {
                zs[l - 1].mapv(|z| self.activation.apply(z))
            };
            zs.push(a.dot(&w.t()) + b);
        }
        zs
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Array2<T> {
        self.forward_all(x).pop().expect("layers")
    }

    /// Mean squared error over all cells.
    pub fn loss(&self, x: ArrayView2<T>, y: ArrayView2<T>) -> T {
        let d = self.forward(x) - y;
        d.mapv(|v| v * v).sum() / T::of_usize(d.len())
    }

    fn backward(&self, x: ArrayView2<T>, y: ArrayView2<T>) -> (T, Grads<T>) {
        let zs = self.forward_all(x);
        let out = zs.last().expect("layers");
        let diff = out - &y;
        let cells = T::of_usize(diff.len());
        let loss = diff.mapv(|v| v * v).sum() / cells;
        let mut delta = diff.mapv(|v| T::of(2.0) * v / cells);
        let n = self.weights.len();
        let mut gw = vec![Array2::zeros((0, 0)); n];
        let mut gb = vec![Array1::zeros(0); n];
        for l in (0..n).rev() {
            let a_prev = if l == 0 {
                x.to_owned()
            } else {
                zs[l - 1].mapv(|z| self.activation.apply(z))
            };
            gw[l] = delta.t().dot(&a_prev);
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let back = delta.dot(&self.weights[l]);
                delta = ndarray::Zip::from(&back)
                    .and(&zs[l - 1])
                    .map_collect(|&g, &z| g * self.activation.derivative(z));
            }
        }
        (loss, Grads { w: gw, b: gb })
    }

    /// Parameters flattened layer by layer: weights (row-major) then biases.
    pub fn params(&self) -> Vec<T> {
        let mut p = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            p.extend(w.iter().copied());
            p.extend(b.iter().copied());
        }
        p
    }

    pub fn set_params(&mut self, p: &[T]) {
        let mut it = p.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(|v| *v = it.next().expect("parameter count"));
            b.iter_mut().for_each(|v| *v = it.next().expect("parameter count"));
        }
        assert!(it.next().is_none(), "parameter count");
    }

    /// Loss and its gradient in [`Network::params`] order.
    pub fn loss_and_gradient(&self, x: ArrayView2<T>, y: ArrayView2<T>) -> (T, Vec<T>) {
        let (loss, g) = self.backward(x, y);
        let mut flat = Vec::new();
        for (w, b) in g.w.iter().zip(&g.b) {
            flat.extend(w.iter().copied());
            flat.extend(b.iter().copied());
        }
        (loss, flat)
    }

    /// Trains on standardized `x` and `y` from a seeded initialization with
    /// per-epoch seeded shuffling.
    pub fn fit(x: ArrayView2<T>, y: ArrayView2<T>, params: &FcnnParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if x.nrows() == 0 {
            return Err(Error::NoTrainingData);
        }
        if y.nrows() != x.nrows() {
            return Err(Error::invalid("fcnn: x and y row counts differ"));
        }
        let mut sizes = vec![x.ncols()];
        sizes.extend(&params.hidden);
        sizes.push(y.ncols());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Network::init(&sizes, params.activation, &mut rng);
        let lr = T::of(params.learning_rate);
        let (b1, b2, eps) = (T::of(0.9), T::of(0.999), T::of(1e-8));
        let mut m = net.params().iter().map(|_| T::zero()).collect::<Vec<_>>();
        let mut v = m.clone();
        let mut step = 0i32;
        let mut order: Vec<usize> = (0..x.nrows()).collect();
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(params.batch_size) {
                let xb = x.select(Axis(0), batch);
                let yb = y.select(Axis(0), batch);
                let (_, g) = net.loss_and_gradient(xb.view(), yb.view());
                let mut p = net.params();
                match params.optimizer {
                    Optimizer::Sgd => {
                        for (pi, gi) in p.iter_mut().zip(&g) {
                            *pi -= lr * *gi;
                        }
                    }
                    Optimizer::Adam => {
                        step += 1;
                        let c1 = T::one() - b1.powi(step);
                        let c2 = T::one() - b2.powi(step);
                        for i in 0..p.len() {
                            m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                            v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                            p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                        }
                    }
                }
                net.set_params(&p);
            }
            let l = net.loss(x, y);
            net.loss_history.push(l);
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (Array2<f64>, Array2<f64>) {
        let x = Array2::from_shape_fn((24, 3), |(i, j)| ((i * (j + 2)) % 7) as f64 / 7.0 - 0.4);
        let y = Array2::from_shape_fn((24, 2), |(i, k)| x[[i, 0]] * 2.0 - x[[i, 2]] + k as f64);
        (x, y)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = data();
        for act in [Activation::Tanh, Activation::Relu] {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut net = Network::<f64>::init(&[3, 5, 4, 2], act, &mut rng);
            // off the relu kink
            for b in net.biases.iter_mut() {
                b.mapv_inplace(|_| rng.random_range(0.05..0.3));
            }
            let (_, g) = net.loss_and_gradient(x.view(), y.view());
            let p0 = net.params();
            let eps = 1e-5;
            for i in 0..p0.len() {
                let mut probe = net.clone();
                let mut p = p0.clone();
                p[i] += eps;
                probe.set_params(&p);
                let up = probe.loss(x.view(), y.view());
                p[i] -= 2.0 * eps;
                probe.set_params(&p);
                let down = probe.loss(x.view(), y.view());
                let fd = (up - down) / (2.0 * eps);
                let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-6);
                assert!(rel <= 1e-4, "{act:?} param {i}: fd {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (x, y) = data();
        let p = FcnnParams { hidden: vec![4], epochs: 3, batch_size: 5, ..Default::default() };
        let a = Network::fit(x.view(), y.view(), &p, 9).unwrap();
        let b = Network::fit(x.view(), y.view(), &p, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, Network::fit(x.view(), y.view(), &p, 10).unwrap());
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Network::<f32>::init(&[2, 3, 1], Activation::Relu, &mut rng);
        let p = net.params();
        assert_eq!(p.len(), 2 * 3 + 3 + 3 + 1);
        net.set_params(&p);
        assert_eq!(net.params(), p);
    }

    #[test]
    fn rejects_zero_width_layer() {
        let (x, y) = data();
        let p = FcnnParams { hidden: vec![0], ..Default::default() };
        assert!(Network::fit(x.view(), y.view(), &p, 0).is_err());
    }
}
