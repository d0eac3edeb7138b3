//! End-to-end runs of the `revrl` binary.

use std::path::Path;
use std::process::{Command, Output};

fn revrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_revrl")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const TINY_PENDULUM: &str = "[env]\nname = \"pendulum\"\n[run]\ntotal_env_steps = 1000\neval_interval = 500\n\
                             eval_episodes = 1\nwarmup_env_steps = 200\n[learner]\nhidden_sizes = [8, 8]\n";

#[test]
fn verify_prints_three_check_lines() {
    let o = revrl(&["verify", "--env", "velocity-chain"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("CHECK darmdp passed max_violation=0e0"));
    assert!(lines[1].starts_with("CHECK detailed_balance"));
    assert!(lines[2].starts_with("CHECK dynamic_reversibility passed max_violation=0e0"));
}

#[test]
fn breaking_verify_names_the_crash() {
    let o = revrl(&["verify", "--env", "velocity-chain", "--breaking"]);
    assert_eq!(o.status.code(), Some(0));
    let first = stdout(&o).lines().next().unwrap().to_string();
    assert!(first.starts_with("CHECK darmdp failed max_violation=1e0 witness="), "{first}");
    assert!(first.contains("crash"));
}

#[test]
fn verify_rejects_continuous_envs() {
    let o = revrl(&["verify", "--env", "pendulum"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "[env]\nname = \"pendulum\"\n[run]\ntotal_env_steps = 1000\nbogus = 1\n");
    let o = revrl(&["train", "--config", &cfg, "--seed", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run.bogus"), "{}", stderr(&o));
}

#[test]
fn mistyped_learner_value_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "[env]\nname = \"pendulum\"\n[run]\ntotal_env_steps = 1000\n[learner]\nbatch_size = \"big\"\n",
    );
    let o = revrl(&["sweep", "--config", &cfg, "--seeds", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("learner.batch_size"), "{}", stderr(&o));
}

#[test]
fn eval_interval_must_divide_the_budget() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "[env]\nname = \"pendulum\"\n[run]\ntotal_env_steps = 1000\neval_interval = 300\n",
    );
    let o = revrl(&["train", "--config", &cfg, "--seed", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run.eval_interval"));
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", TINY_PENDULUM);
    let out = dir.path().join("out");
    let o = revrl(&["train", "--config", &cfg, "--seed", "1", "--tsda", "on", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("run_id,seed,env_step,mean_return,std_return,wall_seconds"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("pendulum_tsda-on,1,500,"));
    assert!(!csv.contains('\r'));

    let ckpt = out.join("policy.bin");
    let o = revrl(&["eval", "--checkpoint", ckpt.to_str().unwrap(), "--env", "pendulum", "--episodes", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o);
    let mean: f64 = line
        .split_whitespace()
        .find_map(|w| w.strip_prefix("mean_return="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.0..=1000.0).contains(&mean));

    // A pendulum policy does not fit the cartpole observation.
    let o = revrl(&["eval", "--checkpoint", ckpt.to_str().unwrap(), "--env", "cartpole"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn divergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", &TINY_PENDULUM.replace("[learner]\n", "[learner]\ncritic_lr = 1e200\n"));
    let out = dir.path().join("out");
    let o = revrl(&["train", "--config", &cfg, "--seed", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains(",NaN,NaN,"));
}

#[test]
fn missing_checkpoint_is_an_error() {
    let o = revrl(&["eval", "--checkpoint", "/nonexistent/policy.bin", "--env", "pendulum"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_writes_both_arms() {
    let dir = tempfile::tempdir().unwrap();
    let text = TINY_PENDULUM.replace(
        "[learner]",
        &format!("output_dir = \"{}\"\n[learner]", dir.path().join("sweep").display()),
    );
    let cfg = write_config(dir.path(), "run.toml", &text);
    let o = revrl(&["sweep", "--config", &cfg, "--seeds", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("tsda=off seeds=2 failed=0"));
    assert!(out.contains("tsda=on seeds=2 failed=0"));
    let sweep = dir.path().join("sweep");
    for f in ["metrics.csv", "aggregate.csv", "comparison.csv", "policy_tsda-on_seed1.bin", "policy_tsda-off_seed0.bin"] {
        assert!(sweep.join(f).exists(), "{f}");
    }
    let metrics = std::fs::read_to_string(sweep.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 2 * 2 * 2);
}
