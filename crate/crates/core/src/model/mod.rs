//! Learned one-step dynamics: a deterministic autoregressive network with one
//! Gaussian density head per observation dimension.
//!
//! Each output dimension `order[k]` has its own subnetwork. It sees the
//! normalized `(s, a)` input plus the normalized deltas of the dimensions
//! that come before it in `order`: true deltas while training, predicted ones
//! at prediction time. The head emits a mean and a log-variance; prediction
//! uses the mean only.

mod mlp;
mod normalize;

use std::fs;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{Action, ActionSpace};
use crate::error::{Error, Result};
use crate::trace::Transition;

pub use mlp::{Adam, Dense, Mlp};
pub use normalize::Normalizer;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Finite-difference step for gradient checks. Smaller steps are dominated by
/// rounding in the loss, larger ones by truncation.
pub const GRAD_CHECK_STEP: f64 = 1e-5;

const MIN_LOGVAR: f64 = -10.0;
const MAX_LOGVAR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    #[default]
    GaussianNll,
    Mse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Full passes over the training split per `train` call.
    pub passes: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub holdout_fraction: f64,
    pub loss: Loss,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Continue from the previous weights instead of re-initializing.
    pub warm_start: bool,
    /// Passes per call once the model is trained and warm-starting;
    /// `passes` when unset.
    pub warm_passes: Option<usize>,
    /// Autoregressive order of the output dimensions; identity if unset.
    pub dim_order: Option<Vec<usize>>,
    /// Predictions are clamped to this multiple of the observed range.
    pub output_clamp_factor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            passes: 300,
            learning_rate: 1e-3,
            batch_size: 64,
            hidden_layers: 2,
            hidden_units: 50,
            holdout_fraction: 0.1,
            loss: Loss::GaussianNll,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            warm_start: true,
            warm_passes: None,
            dim_order: None,
            output_clamp_factor: 10.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, obs_dim: usize) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::Config("train.holdout_fraction must be in [0, 1)".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("train.learning_rate must be positive".into()));
        }
        if let Some(order) = &self.dim_order {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..obs_dim).collect::<Vec<_>>() {
                return Err(Error::Config(format!(
                    "train.dim_order must be a permutation of 0..{obs_dim}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub n_train: usize,
    pub n_holdout: usize,
    /// Mean minibatch loss of each pass, summed over output dimensions.
    pub pass_losses: Vec<f64>,
    pub train_mse: f64,
    pub holdout_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsModel {
    version: u32,
    obs_dim: usize,
    action_space: ActionSpace,
    loss: Loss,
    order: Vec<usize>,
    /// `nets[k]` predicts dimension `order[k]`.
    nets: Vec<Mlp>,
    input_norm: Normalizer,
    target_norm: Normalizer,
    out_lo: Array1<f64>,
    out_hi: Array1<f64>,
    trained: bool,
}

struct Design {
    /// Raw `[s | enc(a)]` rows.
    inputs: Array2<f64>,
    deltas: Array2<f64>,
    next: Array2<f64>,
}

impl DynamicsModel {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, action_space: ActionSpace, cfg: &TrainConfig, rng: &mut R) -> Self {
        let order = cfg.dim_order.clone().unwrap_or_else(|| (0..obs_dim).collect());
        let base = obs_dim + action_space.encoded_dim();
        let nets = (0..obs_dim)
            .map(|k| {
                let mut widths = vec![base + k];
                widths.extend(std::iter::repeat_n(cfg.hidden_units, cfg.hidden_layers));
                widths.push(2);
                Mlp::new(&widths, rng)
            })
            .collect();
        Self {
            version: CHECKPOINT_VERSION,
            obs_dim,
            action_space,
            loss: cfg.loss,
            order,
            nets,
            input_norm: Normalizer::identity(base),
            target_norm: Normalizer::identity(obs_dim),
            out_lo: Array1::from_elem(obs_dim, f64::NEG_INFINITY),
            out_hi: Array1::from_elem(obs_dim, f64::INFINITY),
            trained: false,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn nets(&self) -> &[Mlp] {
        &self.nets
    }

    pub fn input_normalizer(&self) -> &Normalizer {
        &self.input_norm
    }

    pub fn target_normalizer(&self) -> &Normalizer {
        &self.target_norm
    }

    fn base_dim(&self) -> usize {
        self.obs_dim + self.action_space.encoded_dim()
    }

    fn design(&self, data: &[Transition]) -> Result<Design> {
        let n = data.len();
        let base = self.base_dim();
        let mut inputs = Array2::zeros((n, base));
        let mut deltas = Array2::zeros((n, self.obs_dim));
        let mut next = Array2::zeros((n, self.obs_dim));
        for (i, t) in data.iter().enumerate() {
            for (what, got) in [
                ("transition state", t.s.len()),
                ("transition next state", t.s_next.len()),
            ] {
                if got != self.obs_dim {
                    return Err(Error::Dimension {
                        what,
                        expected: self.obs_dim,
                        got,
                    });
                }
            }
            let mut row = inputs.row_mut(i);
            for (j, v) in t.s.iter().enumerate() {
                row[j] = *v;
            }
            self.action_space.encode(
                t.a,
                row.slice_mut(s![self.obs_dim..]).as_slice_mut().expect("row-major"),
            );
            for j in 0..self.obs_dim {
                deltas[[i, j]] = t.s_next[j] - t.s[j];
                next[[i, j]] = t.s_next[j];
            }
        }
        Ok(Design { inputs, deltas, next })
    }

    /// `[normalized input | normalized deltas in autoregressive order]`.
    fn conditioning_matrix(&self, d: &Design) -> Array2<f64> {
        let base = self.base_dim();
        let mut z = Array2::zeros((d.inputs.nrows(), base + self.obs_dim));
        z.slice_mut(s![.., ..base])
            .assign(&self.input_norm.normalize(d.inputs.view()));
        let y = self.target_norm.normalize(d.deltas.view());
        for (k, &dim) in self.order.iter().enumerate() {
            z.column_mut(base + k).assign(&y.column(dim));
        }
        z
    }

    pub fn reinitialize<R: Rng + ?Sized>(&mut self, cfg: &TrainConfig, rng: &mut R) {
        *self = Self::new(self.obs_dim, self.action_space.clone(), cfg, rng);
    }

    /// Fits normalization statistics and runs `cfg.passes` minibatch passes
    /// (`cfg.warm_passes` when continuing from trained weights)
    /// over the first `1 - holdout_fraction` of `data`. Held-out rows are the
    /// final ones, never shuffled into training.
    pub fn train<R: Rng + ?Sized>(
        &mut self,
        data: &[Transition],
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<TrainReport> {
        if data.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let n_holdout = ((data.len() as f64) * cfg.holdout_fraction).floor() as usize;
        let n_train = data.len() - n_holdout;
        if n_train == 0 {
            return Err(Error::EmptyTrace);
        }
        let (train, holdout) = data.split_at(n_train);
        let design = self.design(train)?;
        let passes = match cfg.warm_passes {
            Some(p) if self.trained && cfg.warm_start => p,
            _ => cfg.passes,
        };

        self.loss = cfg.loss;
        self.input_norm = Normalizer::fit(design.inputs.view());
        self.target_norm = Normalizer::fit(design.deltas.view());
        self.fit_output_bounds(design.next.view(), cfg.output_clamp_factor);
        self.trained = true;

        let z = self.conditioning_matrix(&design);
        let base = self.base_dim();
        let mut optimizers: Vec<Adam> = self
            .nets
            .iter()
            .map(|net| Adam::new(net, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps))
            .collect();
        let mut indices: Vec<usize> = (0..n_train).collect();
        let mut pass_losses = Vec::with_capacity(passes);
        for pass in 0..passes {
            indices.shuffle(rng);
            let mut total = 0.0;
            let mut batches = 0usize;
            for chunk in indices.chunks(cfg.batch_size) {
                let zb = z.select(Axis(0), chunk);
                for (k, (net, opt)) in self.nets.iter_mut().zip(&mut optimizers).enumerate() {
                    let x = zb.slice(s![.., ..base + k]);
                    let y = zb.column(base + k);
                    let acts = net.forward_cached(x);
                    let (loss, grad) = loss_and_grad(self.loss, acts.output().view(), y);
                    if !loss.is_finite() {
                        return Err(Error::Diverged {
                            pass,
                            dim: self.order[k],
                            loss,
                        });
                    }
                    total += loss;
                    let grads = net.backward(&acts, grad);
                    opt.step(net, &grads);
                }
                batches += 1;
            }
            pass_losses.push(total / batches as f64);
        }

        let train_mse = self.one_step_mse(train)?;
        let holdout_mse = if holdout.is_empty() {
            None
        } else {
            Some(self.one_step_mse(holdout)?)
        };
        Ok(TrainReport {
            n_train,
            n_holdout,
            pass_losses,
            train_mse,
            holdout_mse,
        })
    }

    fn fit_output_bounds(&mut self, next: ArrayView2<f64>, factor: f64) {
        let mut lo = Array1::from_elem(self.obs_dim, f64::INFINITY);
        let mut hi = Array1::from_elem(self.obs_dim, f64::NEG_INFINITY);
        for row in next.rows() {
            for j in 0..self.obs_dim {
                lo[j] = lo[j].min(row[j]);
                hi[j] = hi[j].max(row[j]);
            }
        }
        for j in 0..self.obs_dim {
            let mid = 0.5 * (lo[j] + hi[j]);
            let half = 0.5 * factor * (hi[j] - lo[j]);
            self.out_lo[j] = mid - half;
            self.out_hi[j] = mid + half;
        }
    }

    /// Mean squared one-step prediction error over all dimensions.
    pub fn one_step_mse(&self, data: &[Transition]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let design = self.design(data)?;
        let states = design.inputs.slice(s![.., ..self.obs_dim]);
        let actions: Vec<Action> = data.iter().map(|t| t.a).collect();
        let pred = self.predict_batch(states, &actions)?;
        Ok((pred - &design.next).mapv(|e| e * e).mean().unwrap_or(0.0))
    }

    /// Next-state prediction for a batch: one state per row, one action per
    /// row.
    pub fn predict_batch(&self, states: ArrayView2<f64>, actions: &[Action]) -> Result<Array2<f64>> {
        if !self.trained {
            return Err(Error::Untrained);
        }
        if states.ncols() != self.obs_dim {
            return Err(Error::Dimension {
                what: "state",
                expected: self.obs_dim,
                got: states.ncols(),
            });
        }
        if actions.len() != states.nrows() {
            return Err(Error::Dimension {
                what: "action batch",
                expected: states.nrows(),
                got: actions.len(),
            });
        }
        let n = states.nrows();
        let base = self.base_dim();
        let enc = self.action_space.encoded_dim();
        let mut raw = Array2::zeros((n, base));
        raw.slice_mut(s![.., ..self.obs_dim]).assign(&states);
        let mut buf = vec![0.0; enc];
        for (i, a) in actions.iter().enumerate() {
            self.action_space.encode(*a, &mut buf);
            for (j, v) in buf.iter().enumerate() {
                raw[[i, self.obs_dim + j]] = *v;
            }
        }
        let mut z = Array2::zeros((n, base + self.obs_dim));
        z.slice_mut(s![.., ..base])
            .assign(&self.input_norm.normalize(raw.view()));
        for k in 0..self.obs_dim {
            let out = self.nets[k].forward(z.slice(s![.., ..base + k]));
            z.column_mut(base + k).assign(&out.column(0));
        }
        let mut next = states.to_owned();
        for (k, &dim) in self.order.iter().enumerate() {
            let (mean, std) = (self.target_norm.mean[dim], self.target_norm.std[dim]);
            let (lo, hi) = (self.out_lo[dim], self.out_hi[dim]);
            for i in 0..n {
                let v = next[[i, dim]] + z[[i, base + k]] * std + mean;
                next[[i, dim]] = v.clamp(lo, hi);
            }
        }
        Ok(next)
    }

    pub fn predict(&self, s: &[f64], a: Action) -> Result<Vec<f64>> {
        let states = ArrayView2::from_shape((1, s.len()), s).map_err(|_| Error::Dimension {
            what: "state",
            expected: self.obs_dim,
            got: s.len(),
        })?;
        Ok(self.predict_batch(states, &[a])?.into_raw_vec_and_offset().0)
    }

    /// Largest relative discrepancy between backpropagated gradients of the
    /// training loss and central finite differences (step `h`), over every
    /// parameter of every subnetwork, at random standard-normal inputs and
    /// targets.
    pub fn gradient_check<R: Rng + ?Sized>(&self, n_samples: usize, h: f64, rng: &mut R) -> f64 {
        self.nets
            .iter()
            .map(|net| {
                let x = Array2::from_shape_simple_fn((n_samples, net.input_dim()), || rng.sample(StandardNormal));
                let y = Array1::from_shape_simple_fn(n_samples, || rng.sample(StandardNormal));
                gradient_check_net(net, self.loss, x.view(), y.view(), h)
            })
            .fold(0.0, f64::max)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let model: Self = serde_json::from_slice(&fs::read(path)?)?;
        if model.version != CHECKPOINT_VERSION {
            return Err(Error::Malformed {
                what: format!("checkpoint {}", path.display()),
                detail: format!("version {} (expected {CHECKPOINT_VERSION})", model.version),
            });
        }
        Ok(model)
    }
}

/// Bounded log-variance via two softplus walls; returns `(logvar, dlogvar/draw)`.
fn bounded_logvar(raw: f64) -> (f64, f64) {
    let upper = MAX_LOGVAR - softplus(MAX_LOGVAR - raw);
    let d_upper = sigmoid(MAX_LOGVAR - raw);
    let lv = MIN_LOGVAR + softplus(upper - MIN_LOGVAR);
    (lv, d_upper * sigmoid(upper - MIN_LOGVAR))
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mean loss over the batch and its gradient w.r.t. the `[mean, raw logvar]`
/// head outputs.
pub fn loss_and_grad(loss: Loss, out: ArrayView2<f64>, y: ArrayView1<f64>) -> (f64, Array2<f64>) {
    let n = out.nrows() as f64;
    let mut grad = Array2::zeros(out.raw_dim());
    let mut total = 0.0;
    for i in 0..out.nrows() {
        let err = out[[i, 0]] - y[i];
        match loss {
            Loss::GaussianNll => {
                let (lv, dlv) = bounded_logvar(out[[i, 1]]);
                let inv_var = (-lv).exp();
                total += 0.5 * (lv + err * err * inv_var);
                grad[[i, 0]] = err * inv_var / n;
                grad[[i, 1]] = 0.5 * (1.0 - err * err * inv_var) * dlv / n;
            }
            Loss::Mse => {
                total += err * err;
                grad[[i, 0]] = 2.0 * err / n;
            }
        }
    }
    (total / n, grad)
}

fn batch_loss(net: &Mlp, loss: Loss, x: ArrayView2<f64>, y: ArrayView1<f64>) -> f64 {
    loss_and_grad(loss, net.forward(x).view(), y).0
}

/// Max over parameters of `|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)`.
pub fn gradient_check_net(net: &Mlp, loss: Loss, x: ArrayView2<f64>, y: ArrayView1<f64>, h: f64) -> f64 {
    let acts = net.forward_cached(x);
    let (_, grad_out) = loss_and_grad(loss, acts.output().view(), y);
    let analytic = net.backward(&acts, grad_out).flat_params();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (k, a) in analytic.iter().enumerate() {
        let orig = *probe.param_mut(k);
        *probe.param_mut(k) = orig + h;
        let plus = batch_loss(&probe, loss, x, y);
        *probe.param_mut(k) = orig - h;
        let minus = batch_loss(&probe, loss, x, y);
        *probe.param_mut(k) = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}
