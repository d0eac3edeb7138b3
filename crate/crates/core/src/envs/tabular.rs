use crate::error::{Error, Result};

/// Row-stochastic single-action transition table, `kernel[s][s']`.
pub type Kernel = Vec<Vec<f64>>;

const ROW_SUM_TOL: f64 = 1e-12;

/// Finite MDP with explicit state and action involutions.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMDP {
    pub n_states: usize,
    pub n_actions: usize,
    /// `kernel[a][s][s']`.
    pub kernel: Vec<Kernel>,
    pub reward: Vec<f64>,
    pub state_involution: Vec<usize>,
    pub action_involution: Vec<usize>,
    pub state_labels: Vec<String>,
    pub action_labels: Vec<String>,
}

impl TabularMDP {
    pub fn validate(&self) -> Result<()> {
        if self.kernel.len() != self.n_actions
            || self.reward.len() != self.n_states
            || self.state_labels.len() != self.n_states
            || self.action_labels.len() != self.n_actions
        {
            return Err(Error::contract("tabular MDP tables disagree on sizes"));
        }
        for (a, table) in self.kernel.iter().enumerate() {
            validate_kernel(table, self.n_states)
                .map_err(|e| Error::contract(format!("action {a}: {e}")))?;
        }
        validate_involution(&self.state_involution, self.n_states)?;
        validate_involution(&self.action_involution, self.n_actions)?;
        Ok(())
    }

    /// Transition table of the uniformly random policy, `mean_a P(.|., a)`.
    pub fn policy_averaged_kernel(&self) -> Kernel {
        let w = 1.0 / self.n_actions as f64;
        (0..self.n_states)
            .map(|s| {
                (0..self.n_states)
                    .map(|t| self.kernel.iter().map(|k| k[s][t]).sum::<f64>() * w)
                    .collect()
            })
            .collect()
    }

    /// The MDP seen through the involutions:
    /// `P'(s' | s, a) = P(f(s') | f(s), f(a))`.
    pub fn conjugated(&self) -> TabularMDP {
        let fs = &self.state_involution;
        let fa = &self.action_involution;
        let kernel = (0..self.n_actions)
            .map(|a| {
                (0..self.n_states)
                    .map(|s| (0..self.n_states).map(|t| self.kernel[fa[a]][fs[s]][fs[t]]).collect())
                    .collect()
            })
            .collect();
        TabularMDP {
            kernel,
            reward: (0..self.n_states).map(|s| self.reward[fs[s]]).collect(),
            ..self.clone()
        }
    }
}

pub fn validate_kernel(kernel: &Kernel, n: usize) -> Result<()> {
    if kernel.len() != n {
        return Err(Error::contract(format!("kernel has {} rows, expected {n}", kernel.len())));
    }
    for (s, row) in kernel.iter().enumerate() {
        if row.len() != n {
            return Err(Error::contract(format!("kernel row {s} has {} entries, expected {n}", row.len())));
        }
        if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::contract(format!("kernel row {s} has an invalid probability")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::contract(format!("kernel row {s} sums to {sum}")));
        }
    }
    Ok(())
}

/// Checks that `f` is a permutation of `0..n` with `f(f(i)) = i`.
pub fn validate_involution(f: &[usize], n: usize) -> Result<()> {
    if f.len() != n {
        return Err(Error::contract(format!("involution has {} entries, expected {n}", f.len())));
    }
    for (i, &j) in f.iter().enumerate() {
        if j >= n || f[j] != i {
            return Err(Error::contract(format!("map is not an involution at index {i}")));
        }
    }
    Ok(())
}

/// Restriction of `kernel` to `states` (indices into the original), which
/// must be a closed set so the rows stay stochastic.
pub fn restrict(kernel: &Kernel, states: &[usize]) -> Kernel {
    states
        .iter()
        .map(|&s| states.iter().map(|&t| kernel[s][t]).collect())
        .collect()
}

/// States reachable from `start` along positive-probability edges, in
/// ascending index order.
pub fn reachable_from(kernel: &Kernel, start: usize) -> Vec<usize> {
    let n = kernel.len();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(s) = stack.pop() {
        for (t, &p) in kernel[s].iter().enumerate() {
            if p > 0.0 && !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    (0..n).filter(|&s| seen[s]).collect()
}
