//! Soft actor-critic with twin critics, soft-updated targets and a learned
//! entropy temperature.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::mdp::{Environment, Transition};
use crate::rng::RngStream;
use crate::tsda::ReplayBuffer;

use super::adam::{Adam, ScalarAdam};
use super::config::LearnerConfig;
use super::mlp::Mlp;
use super::policy::{action_columns, concat_columns, Policy};

/// Replay draw converted to observation matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_obs: Array2<f64>,
    /// 1.0 for terminal transitions.
    pub terminals: Array1<f64>,
}

impl Batch {
    pub fn from_transitions(ts: &[&Transition], env: &dyn Environment) -> Result<Self> {
        let n = ts.len();
        let od = env.observation_dim();
        let ad = env.descriptor().action_dim;
        let mut obs = Array2::zeros((n, od));
        let mut next_obs = Array2::zeros((n, od));
        let mut actions = Array2::zeros((n, ad));
        for (b, t) in ts.iter().enumerate() {
            if t.action.dim() != ad {
                return Err(Error::contract("stored action has the wrong dimension"));
            }
            obs.row_mut(b).assign(&Array1::from(env.observe(&t.state)));
            next_obs.row_mut(b).assign(&Array1::from(env.observe(&t.next_state)));
            actions.row_mut(b).assign(&Array1::from(t.action.0.clone()));
        }
        Ok(Self {
            obs,
            actions,
            rewards: ts.iter().map(|t| t.reward).collect(),
            next_obs,
            terminals: ts.iter().map(|t| if t.terminal { 1.0 } else { 0.0 }).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Scalar losses from one environment step's worth of updates, averaged
/// over the rounds that ran.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossRecord {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub temperature_loss: f64,
    pub temperature: f64,
}

fn q_values(q: &Mlp, obs: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<Array1<f64>> {
    Ok(q.forward(concat_columns(obs, actions).view())?.column(0).to_owned())
}

/// Soft Bellman target
/// `y = r + gamma (1 - done) (min(Q1', Q2')(s', a') - alpha log pi(a'|s'))`
/// with `a'` drawn from the policy using `noise`.
pub fn critic_target(
    batch: &Batch,
    q1_target: &Mlp,
    q2_target: &Mlp,
    policy: &Policy,
    temperature: f64,
    discount: f64,
    noise: Array2<f64>,
) -> Result<Array1<f64>> {
    let next = policy.sample_with_noise(batch.next_obs.view(), noise)?;
    let q1 = q_values(q1_target, batch.next_obs.view(), next.actions.view())?;
    let q2 = q_values(q2_target, batch.next_obs.view(), next.actions.view())?;
    let mut y = Array1::zeros(batch.len());
    for b in 0..batch.len() {
        let soft_value = q1[b].min(q2[b]) - temperature * next.log_probs[b];
        y[b] = batch.rewards[b] + discount * (1.0 - batch.terminals[b]) * soft_value;
    }
    Ok(y)
}

/// `mean_b (alpha log pi(a_b|s_b) - min(Q1, Q2)(s_b, a_b))` with actions
/// reparameterized through `noise`. Returns the loss, the actor gradient and
/// the log densities.
pub fn actor_objective(
    policy: &Policy,
    q1: &Mlp,
    q2: &Mlp,
    temperature: f64,
    obs: ArrayView2<f64>,
    noise: Array2<f64>,
) -> Result<(f64, super::mlp::MlpGrads, Array1<f64>)> {
    let n = obs.nrows();
    let inv_n = 1.0 / n as f64;
    let sampled = policy.sample_with_noise(obs, noise)?;
    let input = concat_columns(obs, sampled.actions.view());
    let (out1, cache1) = q1.forward_cached(input.view())?;
    let (out2, cache2) = q2.forward_cached(input.view())?;

    let mut loss = 0.0;
    let mut g1 = Array2::zeros((n, 1));
    let mut g2 = Array2::zeros((n, 1));
    for b in 0..n {
        let (a, c) = (out1[[b, 0]], out2[[b, 0]]);
        loss += temperature * sampled.log_probs[b] - a.min(c);
        if a <= c {
            g1[[b, 0]] = -inv_n;
        } else {
            g2[[b, 0]] = -inv_n;
        }
    }
    let (_, dx1) = q1.backward(&cache1, &g1, false)?;
    let (_, dx2) = q2.backward(&cache2, &g2, false)?;
    let g_action = action_columns(&(dx1 + dx2), obs.ncols());
    let g_logp = Array1::from_elem(n, temperature * inv_n);
    let grads = policy.backward(&sampled, &g_action, &g_logp)?;
    Ok((loss * inv_n, grads, sampled.log_probs))
}

/// Mean squared Bellman error of one critic and its parameter gradient.
pub fn critic_objective(q: &Mlp, obs: ArrayView2<f64>, actions: ArrayView2<f64>, target: &Array1<f64>) -> Result<(f64, super::mlp::MlpGrads)> {
    let n = obs.nrows();
    let (out, cache) = q.forward_cached(concat_columns(obs, actions).view())?;
    let mut loss = 0.0;
    let mut g = Array2::zeros((n, 1));
    for b in 0..n {
        let d = out[[b, 0]] - target[b];
        loss += d * d;
        g[[b, 0]] = 2.0 * d / n as f64;
    }
    let (grads, _) = q.backward(&cache, &g, true)?;
    Ok((loss / n as f64, grads.expect("parameter gradients requested")))
}

#[derive(Debug, Clone)]
pub struct Sac {
    pub config: LearnerConfig,
    pub policy: Policy,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub log_temperature: f64,
    pub target_entropy: f64,
    actor_opt: Adam,
    q1_opt: Adam,
    q2_opt: Adam,
    temperature_opt: ScalarAdam,
}

impl Sac {
    /// Networks are initialized from `rng` in the order actor, critic 1,
    /// critic 2; targets start as copies.
    pub fn new(obs_dim: usize, action_dim: usize, config: LearnerConfig, rng: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let policy = Policy::new(obs_dim, action_dim, &config.hidden_sizes, config.actor_log_std_bounds, rng)?;
        let mut critic_sizes = vec![obs_dim + action_dim];
        critic_sizes.extend_from_slice(&config.hidden_sizes);
        critic_sizes.push(1);
        let q1 = Mlp::new(&critic_sizes, rng)?;
        let q2 = Mlp::new(&critic_sizes, rng)?;
        Ok(Self {
            actor_opt: Adam::new(&policy.actor, config.actor_lr, 0.9),
            q1_opt: Adam::new(&q1, config.critic_lr, 0.9),
            q2_opt: Adam::new(&q2, config.critic_lr, 0.9),
            temperature_opt: ScalarAdam::new(config.temperature_lr, config.temperature_adam_beta1),
            log_temperature: config.initial_temperature.ln(),
            target_entropy: -(action_dim as f64),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            q1,
            q2,
            policy,
            config,
        })
    }

    pub fn temperature(&self) -> f64 {
        self.log_temperature.exp()
    }

    fn diverged(&self, what: &str, value: f64) -> Error {
        Error::TrainingDiverged(format!(
            "{what} = {value}, temperature = {}, finite params: actor {} q1 {} q2 {}",
            self.temperature(),
            self.policy.actor.is_finite(),
            self.q1.is_finite(),
            self.q2.is_finite()
        ))
    }

    pub fn critic_update(&mut self, batch: &Batch, rng: &mut RngStream) -> Result<f64> {
        let noise = self.policy.draw_noise(batch.len(), rng);
        let y = critic_target(
            batch,
            &self.q1_target,
            &self.q2_target,
            &self.policy,
            self.temperature(),
            self.config.discount,
            noise,
        )?;
        let (l1, g1) = critic_objective(&self.q1, batch.obs.view(), batch.actions.view(), &y)?;
        let (l2, g2) = critic_objective(&self.q2, batch.obs.view(), batch.actions.view(), &y)?;
        let loss = l1 + l2;
        if !loss.is_finite() || !g1.is_finite() || !g2.is_finite() {
            return Err(self.diverged("critic loss", loss));
        }
        self.q1_opt.step(&mut self.q1, &g1);
        self.q2_opt.step(&mut self.q2, &g2);
        Ok(loss)
    }

    /// Actor step followed by a temperature step on the same draw.
    pub fn actor_update(&mut self, batch: &Batch, rng: &mut RngStream) -> Result<(f64, f64)> {
        let noise = self.policy.draw_noise(batch.len(), rng);
        let alpha = self.temperature();
        let (loss, grads, log_probs) = actor_objective(&self.policy, &self.q1, &self.q2, alpha, batch.obs.view(), noise)?;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(self.diverged("actor loss", loss));
        }
        self.actor_opt.step(&mut self.policy.actor, &grads);

        // J(log_alpha) = mean(alpha * (-log_pi - target_entropy)), log_pi held fixed.
        let slack = -log_probs.mean().unwrap_or(0.0) - self.target_entropy;
        let temperature_loss = alpha * slack;
        if !temperature_loss.is_finite() {
            return Err(self.diverged("temperature loss", temperature_loss));
        }
        self.temperature_opt.step(&mut self.log_temperature, alpha * slack);
        Ok((loss, temperature_loss))
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        let tau = self.config.q_soft_update_rate;
        self.q1_target.soft_update(&self.q1, tau)?;
        self.q2_target.soft_update(&self.q2, tau)?;
        Ok(())
    }

    /// All updates for one environment step. Each round draws a fresh batch
    /// and runs a critic step, an actor and temperature step, and a target
    /// update, skipping kinds whose per-step count is exhausted.
    pub fn update_step(
        &mut self,
        buffer: &ReplayBuffer,
        env: &dyn Environment,
        buffer_rng: &mut RngStream,
        actor_rng: &mut RngStream,
    ) -> Result<LossRecord> {
        let critic_rounds = self.config.critic_target_updates_per_env_step;
        let actor_rounds = self.config.actor_updates_per_env_step;
        let mut record = LossRecord::default();
        for round in 0..critic_rounds.max(actor_rounds) {
            let draw = buffer.sample(self.config.batch_size, buffer_rng)?;
            let batch = Batch::from_transitions(&draw, env)?;
            if round < critic_rounds {
                record.critic_loss += self.critic_update(&batch, actor_rng)? / critic_rounds as f64;
            }
            if round < actor_rounds {
                let (a, t) = self.actor_update(&batch, actor_rng)?;
                record.actor_loss += a / actor_rounds as f64;
                record.temperature_loss += t / actor_rounds as f64;
            }
            if round < critic_rounds {
                self.soft_update_targets()?;
            }
        }
        record.temperature = self.temperature();
        if !self.policy.actor.is_finite() || !self.q1.is_finite() || !self.q2.is_finite() {
            return Err(self.diverged("non-finite parameter after update, critic loss", record.critic_loss));
        }
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn one_row_batch(reward: f64, terminal: bool) -> Batch {
        Batch {
            obs: array![[0.1, -0.2]],
            actions: array![[0.3]],
            rewards: array![reward],
            next_obs: array![[0.4, 0.5]],
            terminals: array![if terminal { 1.0 } else { 0.0 }],
        }
    }

    fn constant_net(sizes: &[usize], bias: f64) -> Mlp {
        let mut m = Mlp::zeros(sizes).unwrap();
        *m.biases.last_mut().unwrap() += bias;
        m
    }

    fn fixed_policy(mean: f64, log_std: f64) -> Policy {
        let mut actor = Mlp::zeros(&[2, 2]).unwrap();
        actor.biases[0][0] = mean;
        actor.biases[0][1] = log_std;
        Policy::from_actor(actor, [-10.0, 2.0]).unwrap()
    }

    #[test]
    fn terminal_target_is_reward() {
        let b = one_row_batch(0.7, true);
        let q = constant_net(&[3, 1], 5.0);
        let y = critic_target(&b, &q, &q, &fixed_policy(0.0, 0.0), 0.1, 0.99, array![[0.3]]).unwrap();
        assert_eq!(y[0], 0.7);
    }

    #[test]
    fn zero_discount_target_is_reward() {
        let b = one_row_batch(0.7, false);
        let q = constant_net(&[3, 1], 5.0);
        let y = critic_target(&b, &q, &q, &fixed_policy(0.0, 0.0), 0.1, 0.0, array![[0.3]]).unwrap();
        assert_eq!(y[0], 0.7);
    }

    #[test]
    fn scalar_target_by_hand() {
        let b = one_row_batch(0.5, false);
        let q1 = constant_net(&[3, 1], 2.0);
        let q2 = constant_net(&[3, 1], 3.0);
        let p = fixed_policy(0.0, 0.0);
        let y = critic_target(&b, &q1, &q2, &p, 0.2, 0.9, array![[0.0]]).unwrap();
        // a' = tanh(0) = 0 and log pi = -ln(sqrt(2 pi)) - ln(1 + 1e-6).
        let log_pi = -0.5 * (2.0 * std::f64::consts::PI).ln() - (1.0f64 + 1e-6).ln();
        let expected = 0.5 + 0.9 * (2.0 - 0.2 * log_pi);
        assert!((y[0] - expected).abs() < 1e-14);
    }

    #[test]
    fn update_is_deterministic() {
        let cfg = LearnerConfig {
            hidden_sizes: vec![8, 8],
            batch_size: 4,
            ..Default::default()
        };
        let batch = Batch {
            obs: array![[0.1, 0.2], [0.3, -0.1], [0.0, 1.0], [-0.5, 0.5]],
            actions: array![[0.1], [-0.3], [0.9], [0.0]],
            rewards: array![0.1, 0.2, 0.3, 0.4],
            next_obs: array![[0.2, 0.2], [0.3, 0.1], [0.1, 1.0], [-0.4, 0.5]],
            terminals: array![0.0, 0.0, 1.0, 0.0],
        };
        let run = || {
            let mut sac = Sac::new(2, 1, cfg.clone(), &mut RngStream::new(9, 1)).unwrap();
            let mut rng = RngStream::new(9, 2);
            for _ in 0..5 {
                sac.critic_update(&batch, &mut rng).unwrap();
                sac.actor_update(&batch, &mut rng).unwrap();
                sac.soft_update_targets().unwrap();
            }
            (sac.policy.actor.to_flat(), sac.q1.to_flat(), sac.log_temperature)
        };
        assert_eq!(run(), run());
    }
}
