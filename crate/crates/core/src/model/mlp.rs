//! Fully connected tanh network with manual backpropagation and Adam.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `in × out`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations kept from a forward pass: the input and every layer output
/// (hidden outputs are post-tanh, the last one is linear).
pub struct Activations {
    outputs: Vec<Array2<f64>>,
}

impl Activations {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().expect("network has at least one layer")
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Self {
        let layers = widths
            .windows(2)
            .map(|pair| {
                let (n_in, n_out) = (pair[0], pair[1]);
                let limit = (6.0 / (n_in + n_out) as f64).sqrt();
                Dense {
                    w: Array2::from_shape_simple_fn((n_in, n_out), || rng.random_range(-limit..limit)),
                    b: Array1::zeros(n_out),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    w: Array2::zeros(l.w.raw_dim()),
                    b: Array1::zeros(l.b.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut h = x.dot(&self.layers[0].w);
        h += &self.layers[0].b;
        if last > 0 {
            h.mapv_inplace(f64::tanh);
        }
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            h = h.dot(&layer.w);
            h += &layer.b;
            if i < last {
                h.mapv_inplace(f64::tanh);
            }
        }
        h
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Activations {
        let last = self.layers.len() - 1;
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(x.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut h = outputs[i].dot(&layer.w);
            h += &layer.b;
            if i < last {
                h.mapv_inplace(f64::tanh);
            }
            outputs.push(h);
        }
        Activations { outputs }
    }

    /// Parameter gradients given dLoss/dOutput.
    pub fn backward(&self, acts: &Activations, grad_out: Array2<f64>) -> Mlp {
        let n = self.layers.len();
        let mut grads = Vec::with_capacity(n);
        let mut delta = grad_out;
        for i in (0..n).rev() {
            let input = &acts.outputs[i];
            let dw = input.t().dot(&delta);
            let db = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut prev = delta.dot(&self.layers[i].w.t());
                Zip::from(&mut prev).and(input).for_each(|g, &h| *g *= 1.0 - h * h);
                delta = prev;
            }
            grads.push(Dense { w: dw, b: db });
        }
        grads.reverse();
        Mlp { layers: grads }
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    /// Mutable access to the `k`-th parameter in `flat_params` order.
    pub fn param_mut(&mut self, mut k: usize) -> &mut f64 {
        for l in &mut self.layers {
            if k < l.w.len() {
                let cols = l.w.ncols();
                return &mut l.w[[k / cols, k % cols]];
            }
            k -= l.w.len();
            if k < l.b.len() {
                return &mut l.b[k];
            }
            k -= l.b.len();
        }
        panic!("parameter index out of range");
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Mlp,
    v: Mlp,
    t: i32,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            m: net.zeros_like(),
            v: net.zeros_like(),
            t: 0,
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Mlp) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let lr_t = self.lr * (1.0 - b2.powi(self.t)).sqrt() / (1.0 - b1.powi(self.t));
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr_t * *m / (v.sqrt() + eps);
        };
        for (((layer, g), m), v) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
        {
            Zip::from(&mut layer.w)
                .and(&g.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            Zip::from(&mut layer.b)
                .and(&g.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::array;

    #[test]
    fn forward_paths_agree() {
        let net = Mlp::new(&[3, 4, 4, 2], &mut seeded(1));
        let x = array![[0.1, -0.2, 0.3], [1.0, 0.5, -1.5]];
        let a = net.forward(x.view());
        let b = net.forward_cached(x.view());
        assert!((a - b.output()).iter().all(|d| d.abs() < 1e-14));
    }

    #[test]
    fn param_indexing_matches_flattening() {
        let mut net = Mlp::new(&[2, 3, 1], &mut seeded(2));
        let flat = net.flat_params();
        assert_eq!(flat.len(), net.param_count());
        for (k, v) in flat.iter().enumerate() {
            assert_eq!(*net.param_mut(k), *v);
        }
    }

    #[test]
    fn adam_fits_a_line() {
        let mut net = Mlp::new(&[1, 1], &mut seeded(3));
        let mut opt = Adam::new(&net, 0.05, 0.9, 0.999, 1e-8);
        let x = Array2::from_shape_fn((16, 1), |(i, _)| i as f64 / 8.0 - 1.0);
        let y = x.mapv(|v| 3.0 * v - 0.5);
        for _ in 0..2000 {
            let acts = net.forward_cached(x.view());
            let grad = (acts.output() - &y) * (2.0 / 16.0);
            let g = net.backward(&acts, grad);
            opt.step(&mut net, &g);
        }
        assert!((net.layers[0].w[[0, 0]] - 3.0).abs() < 1e-3);
        assert!((net.layers[0].b[0] + 0.5).abs() < 1e-3);
    }
}
