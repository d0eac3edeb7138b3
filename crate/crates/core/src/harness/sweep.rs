use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::envs::make_env;
use crate::error::Result;

use super::config::RunConfig;
use super::metrics::{mean_std, MetricsRow};
use super::train::{train_run, RunOutcome};

/// Across-seed statistics at one evaluation step, over the seeds that had
/// not failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub arm: String,
    pub env_step: usize,
    pub count: usize,
    pub mean_return: f64,
    pub std_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub arm: String,
    pub seeds: usize,
    pub failed: usize,
    pub solved: usize,
    /// Empty when at most half of the seeds solved.
    pub median_solved_at: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ArmReport {
    pub arm: String,
    pub outcomes: Vec<RunOutcome>,
    pub aggregate: Vec<AggregateRow>,
    pub comparison: ComparisonRow,
}

pub fn arm_name(tsda: bool) -> String {
    format!("tsda={}", if tsda { "on" } else { "off" })
}

/// Median with unsolved seeds ranked after every solved one.
pub fn median_solved_at(values: &[Option<usize>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<Option<usize>> = values.to_vec();
    v.sort_by_key(|x| x.unwrap_or(usize::MAX));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2].map(|x| x as f64)
    } else {
        Some((v[n / 2 - 1]? as f64 + v[n / 2]? as f64) / 2.0)
    }
}

pub fn aggregate(arm: &str, outcomes: &[RunOutcome]) -> Vec<AggregateRow> {
    let mut by_step: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for o in outcomes.iter().filter(|o| o.failure.is_none()) {
        for r in &o.rows {
            by_step.entry(r.env_step).or_default().push(r.mean_return);
        }
    }
    by_step
        .into_iter()
        .map(|(env_step, xs)| {
            let (mean_return, std_return) = mean_std(&xs);
            AggregateRow {
                arm: arm.to_string(),
                env_step,
                count: xs.len(),
                mean_return,
                std_return,
            }
        })
        .collect()
}

/// Trains every seed of `config` (in parallel) and summarizes.
pub fn sweep_seeds(config: &RunConfig) -> Result<ArmReport> {
    config.validate()?;
    let threshold = make_env(&config.env_name, &config.env_overrides)?.descriptor().solve_threshold;
    let outcomes = config
        .seeds
        .par_iter()
        .map(|&seed| train_run(config, seed))
        .collect::<Result<Vec<_>>>()?;
    let arm = arm_name(config.tsda_enabled);
    let solved: Vec<Option<usize>> = outcomes
        .iter()
        .map(|o| if o.failure.is_some() { None } else { o.solved_at(threshold) })
        .collect();
    let comparison = ComparisonRow {
        arm: arm.clone(),
        seeds: outcomes.len(),
        failed: outcomes.iter().filter(|o| o.failure.is_some()).count(),
        solved: solved.iter().filter(|s| s.is_some()).count(),
        median_solved_at: median_solved_at(&solved),
    };
    Ok(ArmReport {
        aggregate: aggregate(&arm, &outcomes),
        arm,
        outcomes,
        comparison,
    })
}

/// Runs the same config with augmentation off and on.
pub fn paired_sweep(config: &RunConfig) -> Result<[ArmReport; 2]> {
    let mut off = config.clone();
    off.tsda_enabled = false;
    let mut on = config.clone();
    on.tsda_enabled = true;
    Ok([sweep_seeds(&off)?, sweep_seeds(&on)?])
}

/// All per-seed rows of a report, seeds in config order.
pub fn all_rows(report: &ArmReport) -> Vec<MetricsRow> {
    report.outcomes.iter().flat_map(|o| o.rows.iter().cloned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median_solved_at(&[Some(8000), None, Some(4000)]), Some(8000.0));
        assert_eq!(median_solved_at(&[Some(8000), None, None]), None);
        assert_eq!(median_solved_at(&[Some(4000), Some(8000)]), Some(6000.0));
        assert_eq!(median_solved_at(&[]), None);
    }

    #[test]
    fn arms() {
        assert_eq!(arm_name(true), "tsda=on");
        assert_eq!(arm_name(false), "tsda=off");
    }
}
