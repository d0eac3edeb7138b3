use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use revrl::envs::velocity_chain::COAST_ACTION;
use revrl::envs::{build_velocity_chain, make_env, EnvOverrides};
use revrl::harness::metrics::save_table;
use revrl::harness::sweep::{all_rows, paired_sweep};
use revrl::harness::{evaluate_policy, load_config, save_metrics, train_run};
use revrl::learner::{load_policy, save_policy};
use revrl::reversibility::{verify_tabular, DEFAULT_TOLERANCE};
use revrl::rng::{streams, RngStream};
use revrl::Error;

#[derive(Parser)]
#[command(name = "revrl", version, about = "Time-reversal symmetry workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Train one seed and write metrics.csv and policy.bin.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Overrides run.tsda from the config.
        #[arg(long, value_enum)]
        tsda: Option<Switch>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train seeds 0..n with augmentation off and on and compare.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seeds: u64,
    },
    /// Evaluate a saved policy with deterministic actions.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        env: String,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the reversibility checks on a tabular environment.
    Verify {
        #[arg(long)]
        env: String,
        #[arg(long)]
        breaking: bool,
        #[arg(long, default_value_t = 4)]
        halfwidth: usize,
    },
}

/// Exit 0 on success, 2 on divergence, 1 on any other error.
fn exit_code(e: &Error) -> ExitCode {
    if e.is_divergence() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Train { config, seed, tsda, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(t) = tsda {
                cfg.tsda_enabled = matches!(t, Switch::On);
            }
            std::fs::create_dir_all(&out)?;
            let outcome = train_run(&cfg, seed)?;
            save_metrics(&out.join("metrics.csv"), &outcome.rows)?;
            save_policy(&out.join("policy.bin"), &outcome.policy)?;
            for r in &outcome.rows {
                println!("step {} return {:.2} +- {:.2}", r.env_step, r.mean_return, r.std_return);
            }
            if let Some(f) = outcome.failure {
                eprintln!("seed {seed} diverged: {f}");
                return Ok(ExitCode::from(2));
            }
        }
        Command::Sweep { config, seeds } => {
            let mut cfg = load_config(&config)?;
            if seeds == 0 {
                return Err(Error::Config {
                    key: "--seeds".into(),
                    message: "must be positive".into(),
                });
            }
            cfg.seeds = (0..seeds).collect();
            std::fs::create_dir_all(&cfg.output_dir)?;
            let reports = paired_sweep(&cfg)?;
            let rows: Vec<_> = reports.iter().flat_map(all_rows).collect();
            save_metrics(&cfg.output_dir.join("metrics.csv"), &rows)?;
            let aggregate: Vec<_> = reports.iter().flat_map(|r| r.aggregate.clone()).collect();
            save_table(&cfg.output_dir.join("aggregate.csv"), &aggregate)?;
            let comparison: Vec<_> = reports.iter().map(|r| r.comparison.clone()).collect();
            save_table(&cfg.output_dir.join("comparison.csv"), &comparison)?;
            for r in &reports {
                for o in &r.outcomes {
                    let name = format!("policy_{}_seed{}.bin", r.arm.replace('=', "-"), o.seed);
                    save_policy(&cfg.output_dir.join(name), &o.policy)?;
                }
            }
            for c in &comparison {
                let median = c.median_solved_at.map_or("never".to_string(), |m| m.to_string());
                println!(
                    "{} seeds={} failed={} solved={} median_solved_at={}",
                    c.arm, c.seeds, c.failed, c.solved, median
                );
            }
            if comparison.iter().any(|c| c.failed > 0) {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Eval {
            checkpoint,
            env,
            episodes,
            seed,
        } => {
            let policy = load_policy(&checkpoint)?;
            let env = make_env(&env, &EnvOverrides::default())?;
            if policy.obs_dim() != env.observation_dim() || policy.action_dim != env.descriptor().action_dim {
                return Err(Error::Checkpoint(format!(
                    "policy maps {} -> {}, environment needs {} -> {}",
                    policy.obs_dim(),
                    policy.action_dim,
                    env.observation_dim(),
                    env.descriptor().action_dim
                )));
            }
            let mut rng = RngStream::new(seed, streams::EVAL);
            let (mean, std) = evaluate_policy(&policy, env.as_ref(), episodes, &mut rng, false)?;
            println!("mean_return={mean} std_return={std}");
        }
        Command::Verify { env, breaking, halfwidth } => {
            if env != "velocity-chain" {
                return Err(Error::UnknownEnv(format!("{env} (only velocity-chain is tabular)")));
            }
            let mdp = build_velocity_chain(halfwidth, breaking)?;
            let lines = verify_tabular(&mdp, COAST_ACTION, DEFAULT_TOLERANCE);
            for l in &lines {
                println!("{l}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
