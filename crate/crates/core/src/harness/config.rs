//! Run configuration files.
//!
//! TOML with three tables. Only `env.name` and `run.total_env_steps` are
//! required:
//!
//! ```toml
//! [env]
//! name = "cartpole"          # registry name
//! friction_multiplier = 1.0  # any parameter override the environment has
//!
//! [run]
//! total_env_steps = 100000
//! eval_interval = 4000       # must divide total_env_steps
//! eval_episodes = 10
//! seeds = [0, 1, 2]
//! tsda = true
//! output_dir = "runs/cartpole"
//! eval_stochastic = false
//! record_wall_clock = true   # false writes 0 in wall_seconds
//! stop_on_solve = false      # stop a seed at its first solved evaluation
//! warmup_env_steps = 1000
//!
//! [learner]
//! hidden_sizes = [256, 256]  # plus every LearnerConfig field
//! ```

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::envs::{make_env, EnvOverrides};
use crate::error::{Error, Result};
use crate::learner::LearnerConfig;
use crate::tsda::WARMUP_ENV_STEPS;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env_name: String,
    pub env_overrides: EnvOverrides,
    pub tsda_enabled: bool,
    pub total_env_steps: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub learner: LearnerConfig,
    pub output_dir: PathBuf,
    pub eval_stochastic: bool,
    pub record_wall_clock: bool,
    pub stop_on_solve: bool,
    pub warmup_env_steps: usize,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunSection {
    total_env_steps: Option<usize>,
    eval_interval: usize,
    eval_episodes: usize,
    seeds: Vec<u64>,
    tsda: bool,
    output_dir: PathBuf,
    eval_stochastic: bool,
    record_wall_clock: bool,
    stop_on_solve: bool,
    warmup_env_steps: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            total_env_steps: None,
            eval_interval: 4000,
            eval_episodes: 10,
            seeds: vec![0],
            tsda: false,
            output_dir: PathBuf::from("runs"),
            eval_stochastic: false,
            record_wall_clock: true,
            stop_on_solve: false,
            warmup_env_steps: WARMUP_ENV_STEPS,
        }
    }
}

const SECTIONS: [&str; 3] = ["env", "run", "learner"];

/// Deserializes one table, naming the offending key on failure.
fn section<T: DeserializeOwned + Default>(name: &str, table: Option<&toml::Table>) -> Result<T> {
    let Some(table) = table else {
        return Ok(T::default());
    };
    match toml::Value::Table(table.clone()).try_into::<T>() {
        Ok(v) => Ok(v),
        Err(whole) => {
            for (key, value) in table {
                let mut single = toml::Table::new();
                single.insert(key.clone(), value.clone());
                if let Err(e) = toml::Value::Table(single).try_into::<T>() {
                    return Err(Error::config(format!("{name}.{key}"), e.to_string().trim().to_string()));
                }
            }
            Err(Error::config(name, whole.to_string().trim().to_string()))
        }
    }
}

fn subtable<'a>(root: &'a toml::Table, name: &str) -> Result<Option<&'a toml::Table>> {
    match root.get(name) {
        None => Ok(None),
        Some(toml::Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(Error::config(name, "expected a table")),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let root: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<file>", e.to_string().trim().to_string()))?;
    if let Some(key) = root.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
        return Err(Error::config(key.clone(), "unknown section"));
    }

    let mut env_table = subtable(&root, "env")?.cloned().unwrap_or_default();
    let env_name = match env_table.remove("name") {
        Some(toml::Value::String(s)) => s,
        Some(_) => return Err(Error::config("env.name", "expected a string")),
        None => return Err(Error::config("env.name", "missing")),
    };
    let env_overrides: EnvOverrides = section("env", Some(&env_table))?;
    let run: RunSection = section("run", subtable(&root, "run")?)?;
    let learner: LearnerConfig = section("learner", subtable(&root, "learner")?)?;

    let config = RunConfig {
        env_name,
        env_overrides,
        tsda_enabled: run.tsda,
        total_env_steps: run
            .total_env_steps
            .ok_or_else(|| Error::config("run.total_env_steps", "missing"))?,
        eval_interval: run.eval_interval,
        eval_episodes: run.eval_episodes,
        seeds: run.seeds,
        learner,
        output_dir: run.output_dir,
        eval_stochastic: run.eval_stochastic,
        record_wall_clock: run.record_wall_clock,
        stop_on_solve: run.stop_on_solve,
        warmup_env_steps: run.warmup_env_steps,
    };
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

impl RunConfig {
    /// Defaults for everything except the environment and step budget.
    pub fn new(env_name: &str, total_env_steps: usize) -> Self {
        let run = RunSection::default();
        Self {
            env_name: env_name.to_string(),
            env_overrides: EnvOverrides::default(),
            tsda_enabled: run.tsda,
            total_env_steps,
            eval_interval: run.eval_interval,
            eval_episodes: run.eval_episodes,
            seeds: run.seeds,
            learner: LearnerConfig::default(),
            output_dir: run.output_dir,
            eval_stochastic: run.eval_stochastic,
            record_wall_clock: run.record_wall_clock,
            stop_on_solve: run.stop_on_solve,
            warmup_env_steps: run.warmup_env_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        make_env(&self.env_name, &self.env_overrides)?;
        self.learner.validate()?;
        if self.total_env_steps == 0 {
            return Err(Error::config("run.total_env_steps", "must be positive"));
        }
        if self.eval_interval == 0 || !self.total_env_steps.is_multiple_of(self.eval_interval) {
            return Err(Error::config(
                "run.eval_interval",
                format!("must be positive and divide total_env_steps = {}", self.total_env_steps),
            ));
        }
        if self.eval_episodes == 0 {
            return Err(Error::config("run.eval_episodes", "must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("run.seeds", "must not be empty"));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(Error::config("run.seeds", "must be distinct"));
        }
        if self.warmup_env_steps < self.learner.batch_size {
            return Err(Error::config(
                "run.warmup_env_steps",
                format!("must be at least learner.batch_size = {}", self.learner.batch_size),
            ));
        }
        Ok(())
    }

    /// Identifier written in the `run_id` metrics column.
    pub fn run_id(&self) -> String {
        format!("{}_tsda-{}", self.env_name, if self.tsda_enabled { "on" } else { "off" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(e: Error) -> String {
        match e {
            Error::Config { key, .. } => key,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("[env]\nname = \"pendulum\"\n[run]\ntotal_env_steps = 8000\n").unwrap();
        assert_eq!(c.eval_interval, 4000);
        assert_eq!(c.eval_episodes, 10);
        assert_eq!(c.learner, LearnerConfig::default());
        assert!(!c.tsda_enabled);
    }

    #[test]
    fn empty_learner_section_is_default() {
        let c = parse_config("[env]\nname = \"pendulum\"\n[run]\ntotal_env_steps = 8000\n[learner]\n").unwrap();
        assert_eq!(c.learner, LearnerConfig::default());
    }

    #[test]
    fn negative_steps_name_the_key() {
        let e = parse_config("[env]\nname = \"pendulum\"\n[run]\ntotal_env_steps = -5\n").unwrap_err();
        assert_eq!(key_of(e), "run.total_env_steps");
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = parse_config("[env]\nname = \"pendulum\"\n[run]\ntotal_env_steps = 8000\n[learner]\nbatch = 3\n").unwrap_err();
        assert_eq!(key_of(e), "learner.batch");
        let e = parse_config("[env]\nname = \"pendulum\"\n[run]\ntotal_env_steps = 8000\nseed = 3\n").unwrap_err();
        assert_eq!(key_of(e), "run.seed");
        let e = parse_config("[env]\nname = \"pendulum\"\nfriction_multiplier = 2.0\n[run]\ntotal_env_steps = 8000\n").unwrap_err();
        assert_eq!(key_of(e), "env.friction_multiplier");
    }

    #[test]
    fn type_mismatch_is_named() {
        let e = parse_config("[env]\nname = \"pendulum\"\n[run]\ntotal_env_steps = 8000\n[learner]\ndiscount = \"high\"\n").unwrap_err();
        assert_eq!(key_of(e), "learner.discount");
    }

    #[test]
    fn interval_must_divide() {
        let e = parse_config("[env]\nname = \"pendulum\"\n[run]\ntotal_env_steps = 8000\neval_interval = 3000\n").unwrap_err();
        assert_eq!(key_of(e), "run.eval_interval");
    }

    #[test]
    fn duplicate_seeds_are_rejected() {
        let e = parse_config("[env]\nname = \"pendulum\"\n[run]\ntotal_env_steps = 8000\nseeds = [1, 1]\n").unwrap_err();
        assert_eq!(key_of(e), "run.seeds");
    }

    #[test]
    fn overrides_reach_the_env() {
        let c = parse_config("[env]\nname = \"cartpole\"\nfriction_multiplier = 2000.0\n[run]\ntotal_env_steps = 4000\n").unwrap();
        assert_eq!(c.env_overrides.friction_multiplier, Some(2000.0));
    }
}
