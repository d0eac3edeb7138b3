//! Tanh-squashed Gaussian policy.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::rng::RngStream;

use super::mlp::{ForwardCache, Mlp, MlpGrads};

/// Added inside the log of the squashing correction.
pub const SQUASH_EPS: f64 = 1e-6;
/// Largest action magnitude; keeps `tanh` saturation strictly inside the box.
pub const MAX_ACTION: f64 = 1.0 - f64::EPSILON;
const HALF_LOG_TWO_PI: f64 = 0.918_938_533_204_672_7;

/// The actor network emits `[mean, log_std]` per action dimension; actions
/// are `tanh(mean + exp(clamp(log_std)) * noise)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub actor: Mlp,
    pub action_dim: usize,
    pub log_std_bounds: [f64; 2],
}

/// Everything a reparameterized batch draw needs for its backward pass.
#[derive(Debug, Clone)]
pub struct SampledBatch {
    pub actions: Array2<f64>,
    pub log_probs: Array1<f64>,
    noise: Array2<f64>,
    log_std_raw: Array2<f64>,
    cache: ForwardCache,
}

/// `-sum log(1 - tanh(u)^2 + eps)`, the change of variables through tanh.
pub fn squash_correction(u: &[f64]) -> f64 {
    -u.iter().map(|&x| (1.0 - x.tanh().powi(2) + SQUASH_EPS).ln()).sum::<f64>()
}

impl Policy {
    pub fn new(obs_dim: usize, action_dim: usize, hidden: &[usize], log_std_bounds: [f64; 2], rng: &mut RngStream) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * action_dim);
        Self::from_actor(Mlp::new(&sizes, rng)?, log_std_bounds)
    }

    pub fn from_actor(actor: Mlp, log_std_bounds: [f64; 2]) -> Result<Self> {
        let out = actor.output_dim();
        if !out.is_multiple_of(2) {
            return Err(Error::contract(format!("actor output width {out} is odd")));
        }
        Ok(Self {
            action_dim: out / 2,
            actor,
            log_std_bounds,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    fn clamp_log_std(&self, x: f64) -> f64 {
        x.clamp(self.log_std_bounds[0], self.log_std_bounds[1])
    }

    /// `tanh(mean)`, the evaluation action.
    pub fn deterministic_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let out = self.actor.apply(obs)?;
        Ok(out[..self.action_dim].iter().map(|m| m.tanh()).collect())
    }

    /// Mean and clamped standard deviation for one observation.
    pub fn distribution(&self, obs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let out = self.actor.apply(obs)?;
        let k = self.action_dim;
        Ok((
            out[..k].to_vec(),
            out[k..].iter().map(|&l| self.clamp_log_std(l).exp()).collect(),
        ))
    }

    pub fn draw_noise(&self, rows: usize, rng: &mut RngStream) -> Array2<f64> {
        Array2::from_shape_fn((rows, self.action_dim), |_| rng.standard_normal())
    }

    /// Reparameterized draw for every row of `obs` with the given standard
    /// normal `noise`.
    pub fn sample_with_noise(&self, obs: ArrayView2<f64>, noise: Array2<f64>) -> Result<SampledBatch> {
        let (out, cache) = self.actor.forward_cached(obs)?;
        let k = self.action_dim;
        if noise.dim() != (out.nrows(), k) {
            return Err(Error::contract("noise shape does not match the batch"));
        }
        let mean = out.slice(s![.., ..k]);
        let log_std_raw = out.slice(s![.., k..]).to_owned();
        let mut actions = Array2::zeros((out.nrows(), k));
        let mut log_probs = Array1::zeros(out.nrows());
        for b in 0..out.nrows() {
            let mut lp = 0.0;
            for i in 0..k {
                let ls = self.clamp_log_std(log_std_raw[[b, i]]);
                let e = noise[[b, i]];
                let t = (mean[[b, i]] + ls.exp() * e).tanh().clamp(-MAX_ACTION, MAX_ACTION);
                actions[[b, i]] = t;
                lp += -0.5 * e * e - ls - HALF_LOG_TWO_PI - (1.0 - t * t + SQUASH_EPS).ln();
            }
            log_probs[b] = lp;
        }
        Ok(SampledBatch {
            actions,
            log_probs,
            noise,
            log_std_raw,
            cache,
        })
    }

    pub fn sample_batch(&self, obs: ArrayView2<f64>, rng: &mut RngStream) -> Result<SampledBatch> {
        let noise = self.draw_noise(obs.nrows(), rng);
        self.sample_with_noise(obs, noise)
    }

    /// One stochastic action and its log density.
    pub fn sample(&self, obs: &[f64], rng: &mut RngStream) -> Result<(Vec<f64>, f64)> {
        let view = ArrayView2::from_shape((1, obs.len()), obs).map_err(|e| Error::contract(e.to_string()))?;
        let b = self.sample_batch(view, rng)?;
        Ok((b.actions.row(0).to_vec(), b.log_probs[0]))
    }

    /// Actor parameter gradient of
    /// `L = sum_b (g_logp[b] * log_prob[b] + sum_i g_action[b, i] * action[b, i])`
    /// with the noise held fixed.
    pub fn backward(&self, batch: &SampledBatch, g_action: &Array2<f64>, g_logp: &Array1<f64>) -> Result<MlpGrads> {
        let k = self.action_dim;
        let rows = batch.actions.nrows();
        if g_action.dim() != (rows, k) || g_logp.len() != rows {
            return Err(Error::contract("policy gradient shapes do not match the batch"));
        }
        let [lo, hi] = self.log_std_bounds;
        let mut g_out = Array2::zeros((rows, 2 * k));
        for b in 0..rows {
            for i in 0..k {
                let t = batch.actions[[b, i]];
                let one_minus = 1.0 - t * t;
                let g_u = g_logp[b] * 2.0 * t * one_minus / (one_minus + SQUASH_EPS) + g_action[[b, i]] * one_minus;
                g_out[[b, i]] = g_u;
                let raw = batch.log_std_raw[[b, i]];
                if (lo..=hi).contains(&raw) {
                    g_out[[b, k + i]] = -g_logp[b] + g_u * raw.exp() * batch.noise[[b, i]];
                }
            }
        }
        let (grads, _) = self.actor.backward(&batch.cache, &g_out, true)?;
        Ok(grads.expect("parameter gradients requested"))
    }
}

/// Splits `[obs | action]` input gradients and returns the action block.
pub fn action_columns(input_grad: &Array2<f64>, obs_dim: usize) -> Array2<f64> {
    input_grad.slice(s![.., obs_dim..]).to_owned()
}

/// Horizontal concatenation used for critic inputs.
pub fn concat_columns(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[a, b]).expect("row counts agree")
}
