use std::time::Instant;

use crate::envs::make_env;
use crate::error::Result;
use crate::learner::{Policy, Sac};
use crate::mdp::{Action, Environment, Transition};
use crate::rng::{streams, RngStream};
use crate::tsda::{capacity_for, ReplayBuffer};

use super::config::RunConfig;
use super::metrics::{mean_std, solved_at, MetricsRow};

/// Result of one seed. A divergence ends the seed early with a failure row
/// and `failure` set; it is not returned as an error.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub policy: Policy,
    pub env_steps: usize,
    pub buffer_len: usize,
    pub failure: Option<String>,
}

impl RunOutcome {
    pub fn solved_at(&self, threshold: f64) -> Option<usize> {
        solved_at(&self.rows, threshold)
    }
}

/// Return of one full episode. Divergence scores the episode as 0.
fn run_episode(policy: &Policy, env: &dyn Environment, rng: &mut RngStream, stochastic: bool) -> Result<f64> {
    let mut s = env.reset(rng);
    let mut total = 0.0;
    for _ in 0..env.descriptor().episode_length {
        let obs = env.observe(&s);
        let a = if stochastic {
            policy.sample(&obs, rng)?.0
        } else {
            policy.deterministic_action(&obs)?
        };
        match env.step(&s, &Action(a)) {
            Ok(out) => {
                total += out.reward;
                if out.terminal {
                    break;
                }
                s = out.next;
            }
            Err(e) if e.is_divergence() => {
                log::warn!("{}: evaluation episode diverged, scored 0: {e}", env.descriptor().name);
                return Ok(0.0);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(total)
}

/// Mean and population standard deviation of episodic return. Deterministic
/// mode acts with `tanh(mean)`.
pub fn evaluate_policy(
    policy: &Policy,
    env: &dyn Environment,
    n_episodes: usize,
    rng: &mut RngStream,
    stochastic: bool,
) -> Result<(f64, f64)> {
    if n_episodes == 0 {
        return Err(crate::error::Error::contract("evaluation needs at least one episode"));
    }
    let returns = (0..n_episodes)
        .map(|_| run_episode(policy, env, rng, stochastic))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_std(&returns))
}

/// Mean return of the uniformly random policy, a floor for sanity checks.
pub fn random_policy_return(env: &dyn Environment, n_episodes: usize, rng: &mut RngStream) -> Result<f64> {
    let mut total = 0.0;
    for _ in 0..n_episodes {
        let mut s = env.reset(rng);
        for _ in 0..env.descriptor().episode_length {
            let a = (0..env.descriptor().action_dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let out = env.step(&s, &Action(a))?;
            total += out.reward;
            if out.terminal {
                break;
            }
            s = out.next;
        }
    }
    Ok(total / n_episodes as f64)
}

/// One training seed: environment interaction, replay pushes (with the
/// conjugate twin when augmentation is on), learner updates after warmup,
/// and an evaluation row every `eval_interval` steps.
pub fn train_run(config: &RunConfig, seed: u64) -> Result<RunOutcome> {
    config.validate()?;
    let env = make_env(&config.env_name, &config.env_overrides)?;
    let desc = env.descriptor().clone();
    let mut env_rng = RngStream::new(seed, streams::ENV);
    let mut actor_rng = RngStream::new(seed, streams::ACTOR);
    let mut buffer_rng = RngStream::new(seed, streams::BUFFER);
    let mut eval_rng = RngStream::new(seed, streams::EVAL);

    let mut sac = Sac::new(env.observation_dim(), desc.action_dim, config.learner.clone(), &mut actor_rng)?;
    let mut buffer = ReplayBuffer::new(capacity_for(config.total_env_steps, config.tsda_enabled), config.tsda_enabled)?;
    let run_id = config.run_id();
    let clock = Instant::now();
    let wall = || {
        if config.record_wall_clock {
            clock.elapsed().as_secs_f64()
        } else {
            0.0
        }
    };

    let mut rows = Vec::new();
    let mut s = env.reset(&mut env_rng);
    let mut episode_step = 0;
    let mut step = 0;
    let mut failure = None;

    while step < config.total_env_steps {
        step += 1;
        let result = (|| -> Result<bool> {
            let action = if step <= config.warmup_env_steps {
                Action((0..desc.action_dim).map(|_| actor_rng.uniform(-1.0, 1.0)).collect())
            } else {
                Action(sac.policy.sample(&env.observe(&s), &mut actor_rng)?.0)
            };
            let out = env.step(&s, &action)?;
            buffer.push(
                Transition {
                    state: s.clone(),
                    action: action.clamped(),
                    reward: out.reward,
                    next_state: out.next.clone(),
                    terminal: out.terminal,
                },
                env.as_ref(),
            )?;
            episode_step += 1;
            if out.terminal || episode_step == desc.episode_length {
                s = env.reset(&mut env_rng);
                episode_step = 0;
            } else {
                s = out.next;
            }
            if step >= config.warmup_env_steps {
                sac.update_step(&buffer, env.as_ref(), &mut buffer_rng, &mut actor_rng)?;
            }
            if step % config.eval_interval == 0 {
                let (mean, std) = evaluate_policy(
                    &sac.policy,
                    env.as_ref(),
                    config.eval_episodes,
                    &mut eval_rng,
                    config.eval_stochastic,
                )?;
                log::info!("{run_id} seed {seed} step {step}: return {mean:.1} +- {std:.1}");
                rows.push(MetricsRow {
                    run_id: run_id.clone(),
                    seed,
                    env_step: step,
                    mean_return: mean,
                    std_return: std,
                    wall_seconds: wall(),
                });
                return Ok(config.stop_on_solve && mean >= desc.solve_threshold);
            }
            Ok(false)
        })();
        match result {
            Ok(true) => break,
            Ok(false) => {}
            Err(e) if e.is_divergence() => {
                log::error!("{run_id} seed {seed} aborted at step {step}: {e}");
                rows.push(MetricsRow {
                    run_id: run_id.clone(),
                    seed,
                    env_step: step,
                    mean_return: f64::NAN,
                    std_return: f64::NAN,
                    wall_seconds: wall(),
                });
                failure = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }

    Ok(RunOutcome {
        seed,
        rows,
        policy: sac.policy,
        env_steps: step,
        buffer_len: buffer.len(),
        failure,
    })
}
