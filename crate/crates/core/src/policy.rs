//! Small sigmoid-network policies searched by the MAP-Elites planners, and
//! the behavior space they are binned into.

use std::sync::Arc;

use ndarray::ArrayView2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::{wrap_angle, Action, ActionSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyArch {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub action_space: ActionSpace,
}

impl PolicyArch {
    pub fn new(input_dim: usize, hidden: Vec<usize>, action_space: ActionSpace) -> Self {
        Self {
            input_dim,
            hidden,
            action_space,
        }
    }

    pub fn output_dim(&self) -> usize {
        match &self.action_space {
            ActionSpace::Continuous { .. } => 1,
            ActionSpace::Discrete(values) => values.len(),
        }
    }

    fn layer_dims(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut widths = Vec::with_capacity(self.hidden.len() + 2);
        widths.push(self.input_dim);
        widths.extend(&self.hidden);
        widths.push(self.output_dim());
        (0..widths.len() - 1).map(move |i| (widths[i], widths[i + 1]))
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().map(|(i, o)| (i + 1) * o).sum()
    }

    fn max_width(&self) -> usize {
        self.hidden
            .iter()
            .copied()
            .chain([self.input_dim, self.output_dim()])
            .max()
            .unwrap_or(1)
    }
}

/// Flat parameter vector plus the architecture it belongs to. Each layer is
/// stored as a row-major `out × in` weight block followed by `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    arch: Arc<PolicyArch>,
    params: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Policy {
    pub fn from_params(arch: Arc<PolicyArch>, params: Vec<f64>) -> Self {
        assert_eq!(
            params.len(),
            arch.param_count(),
            "parameter count does not match architecture"
        );
        Self { arch, params }
    }

    pub fn zeros(arch: Arc<PolicyArch>) -> Self {
        let n = arch.param_count();
        Self::from_params(arch, vec![0.0; n])
    }

    pub fn arch(&self) -> &Arc<PolicyArch> {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Raw output-layer pre-activations.
    fn logits(&self, obs: &[f64]) -> Vec<f64> {
        let width = self.arch.max_width();
        let mut input = Vec::with_capacity(width);
        input.extend_from_slice(&obs[..self.arch.input_dim]);
        let mut output = Vec::with_capacity(width);
        let n_layers = self.arch.hidden.len() + 1;
        let mut offset = 0;
        for (layer, (n_in, n_out)) in self.arch.layer_dims().enumerate() {
            let weights = &self.params[offset..offset + n_in * n_out];
            let biases = &self.params[offset + n_in * n_out..offset + (n_in + 1) * n_out];
            offset += (n_in + 1) * n_out;
            output.clear();
            for o in 0..n_out {
                let row = &weights[o * n_in..(o + 1) * n_in];
                let z = biases[o] + row.iter().zip(&input).map(|(w, x)| w * x).sum::<f64>();
                output.push(if layer + 1 < n_layers { sigmoid(z) } else { z });
            }
            std::mem::swap(&mut input, &mut output);
        }
        input
    }

    pub fn act(&self, obs: &[f64]) -> Action {
        let z = self.logits(obs);
        match &self.arch.action_space {
            ActionSpace::Continuous { lo, hi } => lo + (hi - lo) * sigmoid(z[0]),
            ActionSpace::Discrete(values) => {
                let mut best = 0;
                for (i, v) in z.iter().enumerate().skip(1) {
                    if *v > z[best] {
                        best = i;
                    }
                }
                values[best]
            }
        }
    }
}

/// Initial parameters are i.i.d. uniform in `[-1, 1]`.
pub fn sample_policy<R: Rng + ?Sized>(rng: &mut R, arch: &Arc<PolicyArch>) -> Policy {
    let params = (0..arch.param_count()).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Policy::from_params(Arc::clone(arch), params)
}

/// Gaussian parameter mutation; the parent is left untouched.
pub fn vary<R: Rng + ?Sized>(rng: &mut R, parent: &Policy, sigma: f64) -> Policy {
    if sigma == 0.0 {
        return parent.clone();
    }
    let noise = Normal::new(0.0, sigma).expect("variation sigma must be finite and non-negative");
    let params = parent.params.iter().map(|p| p + noise.sample(rng)).collect();
    Policy::from_params(Arc::clone(&parent.arch), params)
}

/// Which two coordinates of an observation span the behavior space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// `(θ, θ̇)` from a `(cos θ, sin θ, θ̇)` observation.
    PendulumPhase,
    /// `(θ0, θ1)` from the six acrobot observables.
    AcrobotJoints,
    /// Two raw observation dimensions.
    Dims([usize; 2]),
}

/// How a simulated trajectory is reduced to one behavior point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    Final,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSpace {
    pub projection: Projection,
    pub bounds: [(f64, f64); 2],
    pub grid: usize,
    #[serde(default)]
    pub reduction: Reduction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorDescriptor {
    pub b: [f64; 2],
    pub cell: (usize, usize),
}

impl BehaviorSpace {
    pub const DEFAULT_GRID: usize = 50;

    pub fn new(projection: Projection, bounds: [(f64, f64); 2]) -> Self {
        Self {
            projection,
            bounds,
            grid: Self::DEFAULT_GRID,
            reduction: Reduction::Final,
        }
    }

    pub fn project(&self, obs: &[f64]) -> [f64; 2] {
        match self.projection {
            Projection::PendulumPhase => [wrap_or_pi(obs[1].atan2(obs[0])), obs[2]],
            Projection::AcrobotJoints => [wrap_or_pi(obs[1].atan2(obs[0])), wrap_or_pi(obs[3].atan2(obs[2]))],
            Projection::Dims([i, j]) => [obs[i], obs[j]],
        }
    }

    fn bin(&self, x: f64, (lo, hi): (f64, f64)) -> usize {
        let x = if x.is_nan() { lo } else { x.clamp(lo, hi) };
        let idx = (self.grid as f64 * (x - lo) / (hi - lo)).floor();
        (idx as usize).min(self.grid - 1)
    }

    pub fn cell(&self, b: [f64; 2]) -> (usize, usize) {
        (self.bin(b[0], self.bounds[0]), self.bin(b[1], self.bounds[1]))
    }

    /// Clamps into bounds; NaN coordinates map to the lower bound.
    pub fn clamp(&self, b: [f64; 2]) -> [f64; 2] {
        let c = |x: f64, (lo, hi): (f64, f64)| if x.is_nan() { lo } else { x.clamp(lo, hi) };
        [c(b[0], self.bounds[0]), c(b[1], self.bounds[1])]
    }

    /// Flattened cell index, row-major in the first coordinate.
    pub fn flat(&self, cell: (usize, usize)) -> usize {
        cell.0 * self.grid + cell.1
    }

    pub fn n_cells(&self) -> usize {
        self.grid * self.grid
    }

    /// Descriptor of a simulated trajectory given as one state per row.
    pub fn descriptor(&self, states: ArrayView2<f64>) -> BehaviorDescriptor {
        assert!(states.nrows() > 0, "behavior descriptor of an empty trajectory");
        let raw = match self.reduction {
            Reduction::Final => {
                let last = states.row(states.nrows() - 1);
                self.project(last.as_slice().unwrap_or(&last.to_vec()))
            }
            Reduction::Mean => {
                let mut acc = [0.0; 2];
                for row in states.rows() {
                    let p = self.project(&row.to_vec());
                    acc[0] += p[0];
                    acc[1] += p[1];
                }
                let n = states.nrows() as f64;
                [acc[0] / n, acc[1] / n]
            }
        };
        let b = self.clamp(raw);
        BehaviorDescriptor { b, cell: self.cell(b) }
    }
}

// atan2 already lands in [-π, π]; only non-finite inputs need care.
fn wrap_or_pi(x: f64) -> f64 {
    if x.is_finite() && x.abs() <= std::f64::consts::PI {
        x
    } else if x.is_finite() {
        wrap_angle(x)
    } else {
        0.0
    }
}
