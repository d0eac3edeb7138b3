//! Exact reversibility checks on finite chains and MDPs.
//!
//! * detailed balance: `pi(s) P(s'|s) = pi(s') P(s|s')`
//! * dynamic reversibility: `pi(s) P(s'|s) = pi(f(s')) P(f(s)|f(s'))`
//! * action reversibility of an MDP: `P(s'|s, a) = P(f(s)|f(s'), f(a))`
//!
//! Each check returns the largest residual together with the index triple
//! that attains it.

use std::fmt;

use crate::envs::tabular::{reachable_from, validate_involution, validate_kernel, Kernel, TabularMDP};
use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
const POWER_ITERATION_CAP: usize = 1_000_000;
const STATIONARY_RESIDUAL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Witness {
    pub state: usize,
    pub action: Option<usize>,
    pub next_state: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport {
    pub max_violation: f64,
    /// `None` only for an empty state space.
    pub witness: Option<Witness>,
    pub tolerance: f64,
    pub passed: bool,
}

impl ViolationReport {
    fn from_max(max_violation: f64, witness: Option<Witness>, tolerance: f64) -> Self {
        Self {
            max_violation,
            witness,
            tolerance,
            passed: max_violation <= tolerance,
        }
    }
}

/// Tracks the first triple attaining the largest residual.
struct MaxTracker {
    best: f64,
    witness: Option<Witness>,
}

impl MaxTracker {
    fn new() -> Self {
        Self {
            best: 0.0,
            witness: None,
        }
    }

    fn offer(&mut self, value: f64, w: Witness) {
        if self.witness.is_none() || value > self.best {
            self.best = value;
            self.witness = Some(w);
        }
    }

    fn report(self, tolerance: f64) -> ViolationReport {
        ViolationReport::from_max(self.best, self.witness, tolerance)
    }
}

/// Partition of states into closed communicating classes. Transient states
/// belong to none.
pub fn closed_classes(kernel: &Kernel) -> Vec<Vec<usize>> {
    let n = kernel.len();
    let reach: Vec<Vec<usize>> = (0..n).map(|s| reachable_from(kernel, s)).collect();
    let mut reach_sets: Vec<Vec<bool>> = vec![vec![false; n]; n];
    for (s, r) in reach.iter().enumerate() {
        for &t in r {
            reach_sets[s][t] = true;
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for s in 0..n {
        let recurrent = reach[s].iter().all(|&t| reach_sets[t][s]);
        if recurrent && !classes.iter().any(|c| c.contains(&s)) {
            classes.push(reach[s].clone());
        }
    }
    classes
}

/// Unique stationary distribution of a row-stochastic kernel, by power
/// iteration on the lazy chain `(I + P) / 2` from the uniform distribution.
pub fn stationary_distribution(kernel: &Kernel) -> Result<Vec<f64>> {
    let n = kernel.len();
    validate_kernel(kernel, n)?;
    if n == 0 {
        return Err(Error::NoUniqueStationary("empty state space".into()));
    }
    let classes = closed_classes(kernel);
    if classes.len() != 1 {
        return Err(Error::NoUniqueStationary(format!(
            "{} closed communicating classes",
            classes.len()
        )));
    }

    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut previous = f64::INFINITY;
    for _ in 0..POWER_ITERATION_CAP {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (s, row) in kernel.iter().enumerate() {
            let w = pi[s];
            if w == 0.0 {
                continue;
            }
            for (t, &p) in row.iter().enumerate() {
                next[t] += w * p;
            }
        }
        let residual = next
            .iter()
            .zip(&pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let total: f64 = next.iter().zip(&pi).map(|(a, b)| 0.5 * (a + b)).sum();
        for (p, q) in pi.iter_mut().zip(&next) {
            *p = 0.5 * (*p + q) / total;
        }
        // Past the required residual, keep going until round-off stalls the
        // iteration; the distance to the fixed point is larger than one
        // step's change by roughly the inverse spectral gap.
        if residual <= STATIONARY_RESIDUAL && (residual <= f64::EPSILON || residual >= previous) {
            return Ok(pi);
        }
        previous = residual;
    }
    Err(Error::NoUniqueStationary(format!(
        "power iteration did not reach residual {STATIONARY_RESIDUAL} in {POWER_ITERATION_CAP} steps"
    )))
}

/// Checks that `pi` is a probability vector with `pi P = pi`.
pub fn validate_invariant(kernel: &Kernel, pi: &[f64]) -> Result<()> {
    let n = kernel.len();
    validate_kernel(kernel, n)?;
    if pi.len() != n || pi.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::contract("distribution has the wrong length or a negative entry"));
    }
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > STATIONARY_RESIDUAL {
        return Err(Error::contract(format!("distribution sums to {total}")));
    }
    let residual = invariance_residual(kernel, pi);
    if residual > STATIONARY_RESIDUAL {
        return Err(Error::contract(format!("distribution is not invariant, residual {residual:e}")));
    }
    Ok(())
}

/// `max_t |(pi P)(t) - pi(t)|`.
pub fn invariance_residual(kernel: &Kernel, pi: &[f64]) -> f64 {
    (0..kernel.len())
        .map(|t| {
            let flow: f64 = kernel.iter().zip(pi).map(|(row, p)| p * row[t]).sum();
            (flow - pi[t]).abs()
        })
        .fold(0.0, f64::max)
}

/// An invariant distribution of `kernel`: uniform when the kernel is doubly
/// stochastic (always the case for a deterministic permutation), otherwise
/// the unique stationary distribution.
pub fn invariant_distribution(kernel: &Kernel) -> Result<Vec<f64>> {
    let n = kernel.len();
    validate_kernel(kernel, n)?;
    let uniform = vec![1.0 / n as f64; n];
    if n > 0 && invariance_residual(kernel, &uniform) <= STATIONARY_RESIDUAL {
        Ok(uniform)
    } else {
        stationary_distribution(kernel)
    }
}

pub fn detailed_balance_residual(kernel: &Kernel, pi: &[f64], s: usize, t: usize) -> f64 {
    (pi[s] * kernel[s][t] - pi[t] * kernel[t][s]).abs()
}

pub fn dynamic_reversibility_residual(kernel: &Kernel, pi: &[f64], f: &[usize], s: usize, t: usize) -> f64 {
    (pi[s] * kernel[s][t] - pi[f[t]] * kernel[f[t]][f[s]]).abs()
}

pub fn darmdp_residual(mdp: &TabularMDP, s: usize, a: usize, t: usize) -> f64 {
    let fs = &mdp.state_involution;
    let fa = &mdp.action_involution;
    (mdp.kernel[a][s][t] - mdp.kernel[fa[a]][fs[t]][fs[s]]).abs()
}

pub fn check_detailed_balance(kernel: &Kernel, tolerance: f64) -> Result<ViolationReport> {
    let pi = stationary_distribution(kernel)?;
    check_detailed_balance_with(kernel, &pi, tolerance)
}

/// Detailed balance against a caller-supplied invariant distribution, for
/// chains whose stationary distribution is not unique.
pub fn check_detailed_balance_with(kernel: &Kernel, pi: &[f64], tolerance: f64) -> Result<ViolationReport> {
    validate_invariant(kernel, pi)?;
    let mut tracker = MaxTracker::new();
    for s in 0..kernel.len() {
        for t in 0..kernel.len() {
            tracker.offer(
                detailed_balance_residual(kernel, pi, s, t),
                Witness {
                    state: s,
                    action: None,
                    next_state: t,
                },
            );
        }
    }
    Ok(tracker.report(tolerance))
}

pub fn check_dynamic_reversibility(kernel: &Kernel, state_involution: &[usize], tolerance: f64) -> Result<ViolationReport> {
    validate_involution(state_involution, kernel.len())?;
    let pi = stationary_distribution(kernel)?;
    check_dynamic_reversibility_with(kernel, &pi, state_involution, tolerance)
}

pub fn check_dynamic_reversibility_with(
    kernel: &Kernel,
    pi: &[f64],
    state_involution: &[usize],
    tolerance: f64,
) -> Result<ViolationReport> {
    validate_involution(state_involution, kernel.len())?;
    validate_invariant(kernel, pi)?;
    let mut tracker = MaxTracker::new();
    for s in 0..kernel.len() {
        for t in 0..kernel.len() {
            tracker.offer(
                dynamic_reversibility_residual(kernel, pi, state_involution, s, t),
                Witness {
                    state: s,
                    action: None,
                    next_state: t,
                },
            );
        }
    }
    Ok(tracker.report(tolerance))
}

/// Kernel-level action reversibility. Needs no stationary distribution.
pub fn check_darmdp(mdp: &TabularMDP, tolerance: f64) -> Result<ViolationReport> {
    mdp.validate()?;
    let mut tracker = MaxTracker::new();
    for a in 0..mdp.n_actions {
        for s in 0..mdp.n_states {
            for t in 0..mdp.n_states {
                tracker.offer(
                    darmdp_residual(mdp, s, a, t),
                    Witness {
                        state: s,
                        action: Some(a),
                        next_state: t,
                    },
                );
            }
        }
    }
    Ok(tracker.report(tolerance))
}

/// One line of `verify` output.
#[derive(Debug, Clone)]
pub struct CheckLine {
    pub name: &'static str,
    pub outcome: std::result::Result<ViolationReport, String>,
    /// Witness rendered with state and action labels.
    pub witness_label: String,
}

impl CheckLine {
    pub fn passed(&self) -> bool {
        matches!(&self.outcome, Ok(r) if r.passed)
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.outcome {
            Ok(r) => write!(
                f,
                "CHECK {} {} max_violation={:e} witness={}",
                self.name,
                if r.passed { "passed" } else { "failed" },
                r.max_violation,
                self.witness_label
            ),
            Err(e) => write!(
                f,
                "CHECK {} failed max_violation=nan witness=none error=\"{}\"",
                self.name, e
            ),
        }
    }
}

fn label_witness(w: Option<Witness>, state_label: impl Fn(usize) -> String, action_labels: &[String]) -> String {
    match w {
        None => "none".into(),
        Some(w) => format!(
            "{},{},{}",
            state_label(w.state),
            w.action.map_or("-".to_string(), |a| action_labels[a].clone()),
            state_label(w.next_state)
        ),
    }
}

/// Runs every check on a tabular MDP: the kernel-level action condition on
/// the full MDP, then detailed balance and dynamic reversibility on the
/// single-action slice `kernel[slice_action]` under its invariant
/// distribution.
pub fn verify_tabular(mdp: &TabularMDP, slice_action: usize, tolerance: f64) -> Vec<CheckLine> {
    let labels = &mdp.state_labels;
    let name_of = |s: usize| labels[s].clone();
    let mut lines = Vec::new();

    let darmdp = check_darmdp(mdp, tolerance);
    lines.push(CheckLine {
        name: "darmdp",
        witness_label: darmdp
            .as_ref()
            .map_or("none".into(), |r| label_witness(r.witness, name_of, &mdp.action_labels)),
        outcome: darmdp.map_err(|e| e.to_string()),
    });

    let slice = match mdp.kernel.get(slice_action) {
        Some(k) => k,
        None => {
            let msg = format!("no action {slice_action}");
            for name in ["detailed_balance", "dynamic_reversibility"] {
                lines.push(CheckLine {
                    name,
                    outcome: Err(msg.clone()),
                    witness_label: "none".into(),
                });
            }
            return lines;
        }
    };
    let pi = invariant_distribution(slice);
    let db = pi
        .as_ref()
        .map_err(|e| e.to_string())
        .and_then(|pi| check_detailed_balance_with(slice, pi, tolerance).map_err(|e| e.to_string()));
    lines.push(CheckLine {
        name: "detailed_balance",
        witness_label: db.as_ref().map_or("none".into(), |r| label_witness(r.witness, name_of, &[])),
        outcome: db,
    });
    let dr = pi.as_ref().map_err(|e| e.to_string()).and_then(|pi| {
        check_dynamic_reversibility_with(slice, pi, &mdp.state_involution, tolerance).map_err(|e| e.to_string())
    });
    lines.push(CheckLine {
        name: "dynamic_reversibility",
        witness_label: dr.as_ref().map_or("none".into(), |r| label_witness(r.witness, name_of, &[])),
        outcome: dr,
    });
    lines
}
