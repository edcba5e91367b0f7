//! Pairwise demotion heuristic for registers too large for the exact joint
//! posterior.
//!
//! All populations except a pair `(i, j)` are frozen at their current
//! estimates `R_k`. The pair shares the free mass `M = 1 − Σ_{k≠i,j} R_k`,
//! so its posterior is one-dimensional in `t = ρ_i / M`. Each pair update
//! replaces `R_i, R_j` with posterior means; sweeps over all active pairs
//! repeat until no estimate moves by more than `epsilon`.

use serde::{Deserialize, Serialize};

use crate::baselines::Counts;
use crate::detector::QubitResponseModel;
use crate::error::{Error, Result};
use crate::likelihood::LikelihoodTable;
use crate::numeric::{log_sum_exp, trapezoid_weights, LogProduct};
use crate::shots::Shots;

use super::{basis_log_density, basis_table, BasisIndex};

pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_MAX_SWEEPS: usize = 50;
pub const DEFAULT_PAIR_GRID_POINTS: usize = 501;

const MASS_TOLERANCE: f64 = 1e-9;
/// Pairs with less free mass than this are set to zero without a posterior.
const EMPTY_MASS: f64 = 1e-15;
/// Truncation of the log(1 + t·r) series; the remainder per shot is below
/// `SERIES_RADIUS^(SERIES_ORDER + 1)`.
const SERIES_ORDER: usize = 4;
const SERIES_RADIUS: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseState {
    n_qubits: usize,
    estimates: Vec<f64>,
    std_devs: Vec<f64>,
    active_set: Vec<BasisIndex>,
    pub epsilon: f64,
    pub max_sweeps: usize,
}

impl PairwiseState {
    pub fn new(
        n_qubits: usize,
        estimates: Vec<f64>,
        active_set: Vec<BasisIndex>,
        epsilon: f64,
        max_sweeps: usize,
    ) -> Result<Self> {
        let k = 1usize << n_qubits;
        if estimates.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: estimates.len(),
            });
        }
        if estimates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidInput("estimates must lie in [0, 1]".into()));
        }
        let sum: f64 = estimates.iter().sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::MassViolation { pair: sum, free: 1.0 });
        }
        let mut active_set = active_set;
        active_set.sort();
        active_set.dedup();
        if active_set.is_empty() {
            return Err(Error::InvalidInput("active set is empty".into()));
        }
        if let Some(b) = active_set.iter().find(|b| b.0 >= k) {
            return Err(Error::InvalidInput(format!("active state {b} out of range")));
        }
        let inactive_mass: f64 = (0..k)
            .filter(|s| active_set.binary_search(&BasisIndex(*s)).is_err())
            .map(|s| estimates[s])
            .sum();
        if inactive_mass > 0.0 {
            return Err(Error::InvalidInput(
                "states outside the active set must have zero estimate".into(),
            ));
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidInput("epsilon must be positive".into()));
        }
        Ok(Self {
            n_qubits,
            std_devs: vec![0.0; k],
            estimates,
            active_set,
            epsilon,
            max_sweeps,
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidInput("epsilon must be positive".into()));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn with_max_sweeps(mut self, max_sweeps: usize) -> Self {
        self.max_sweeps = max_sweeps;
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    /// Posterior standard deviation from the most recent pair update that
    /// touched each state.
    pub fn std_devs(&self) -> &[f64] {
        &self.std_devs
    }

    pub fn active_set(&self) -> &[BasisIndex] {
        &self.active_set
    }

    /// Active pairs in lexicographic order.
    pub fn pairs(&self) -> Vec<(BasisIndex, BasisIndex)> {
        let a = &self.active_set;
        (0..a.len())
            .flat_map(|x| (x + 1..a.len()).map(move |y| (a[x], a[y])))
            .collect()
    }

    /// `1 − Σ_{k≠i,j} R_k`.
    pub fn free_mass(&self, i: BasisIndex, j: BasisIndex) -> f64 {
        let frozen: f64 = self
            .estimates
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i.0 && *k != j.0)
            .map(|(_, r)| r)
            .sum();
        (1.0 - frozen).max(0.0)
    }
}

/// Active set and initial estimates from baseline counts: states with no
/// counts are dropped, the rest start at their count fractions.
pub fn prune_active_set(counts: &Counts) -> Result<PairwiseState> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::EmptyCounts);
    }
    let estimates: Vec<f64> = counts
        .as_slice()
        .iter()
        .map(|&c| c as f64 / total as f64)
        .collect();
    let active = counts
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(s, _)| BasisIndex(s))
        .collect();
    PairwiseState::new(
        counts.n_qubits(),
        estimates,
        active,
        DEFAULT_EPSILON,
        DEFAULT_MAX_SWEEPS,
    )
}

/// `log(ρ_i·P_i(x) + ρ_j·P_j(x) + Σ_{k≠i,j} R_k·P_k(x))`.
pub fn pairwise_conditional_log(
    models: &[QubitResponseModel],
    i: BasisIndex,
    j: BasisIndex,
    state: &PairwiseState,
    rho_i: f64,
    rho_j: f64,
    x_vec: &[f64],
) -> Result<f64> {
    if models.len() != state.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: state.n_qubits,
            got: models.len(),
        });
    }
    let free = state.free_mass(i, j);
    if rho_i < 0.0 || rho_j < 0.0 || (rho_i + rho_j - free).abs() > MASS_TOLERANCE {
        return Err(Error::MassViolation {
            pair: rho_i + rho_j,
            free,
        });
    }
    let mut terms = Vec::with_capacity(state.active_set.len());
    for (k, w) in [(i, rho_i), (j, rho_j)] {
        if w > 0.0 {
            terms.push(w.ln() + basis_log_density(models, k, x_vec)?);
        }
    }
    for &k in &state.active_set {
        let r = state.estimates[k.0];
        if k != i && k != j && r > 0.0 {
            terms.push(r.ln() + basis_log_density(models, k, x_vec)?);
        }
    }
    Ok(log_sum_exp(&terms))
}

/// One pass over every active pair.
pub fn pairwise_sweep(
    state: &PairwiseState,
    models: &[QubitResponseModel],
    shots: &Shots,
    grid_points: usize,
) -> Result<PairwiseState> {
    check_inputs(state, models, shots, grid_points)?;
    if state.active_set.len() < 2 {
        return Err(Error::NoActivePairs);
    }
    let table = basis_table(models, shots)?;
    Ok(sweep_with_table(state, &table, grid_points))
}

fn check_inputs(
    state: &PairwiseState,
    models: &[QubitResponseModel],
    shots: &Shots,
    grid_points: usize,
) -> Result<()> {
    if grid_points < 3 {
        return Err(Error::InvalidResolution(grid_points));
    }
    for got in [models.len(), shots.n_qubits()] {
        if got != state.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: state.n_qubits,
                got,
            });
        }
    }
    Ok(())
}

pub(crate) fn sweep_with_table(
    state: &PairwiseState,
    table: &LikelihoodTable,
    grid_points: usize,
) -> PairwiseState {
    let mut next = state.clone();
    let n_shots = table.n_shots();
    let trap = trapezoid_weights(grid_points);
    let h = 1.0 / (grid_points - 1) as f64;
    let mut exact: Vec<(f64, f64, usize)> = Vec::with_capacity(n_shots);
    let mut log_post = vec![0.0; grid_points];

    for (i, j) in state.pairs() {
        let mass = next.free_mass(i, j);
        if mass <= EMPTY_MASS {
            next.estimates[i.0] = 0.0;
            next.estimates[j.0] = 0.0;
            next.std_devs[i.0] = 0.0;
            next.std_devs[j.0] = 0.0;
            continue;
        }
        // The shifted mixture at t is base + t·slope with ρ_i = t·M and
        // ρ_j = (1 − t)·M. Shots where the pair barely matters (|slope/base|
        // small) enter through a Taylor series of log(1 + t·r) in t; the
        // constant log(base) cancels on normalization and is dropped.
        exact.clear();
        let mut power_sums = [0.0; SERIES_ORDER];
        for n in 0..n_shots {
            let row = table.scaled_row(n);
            let frozen: f64 = next
                .active_set
                .iter()
                .filter(|k| **k != i && **k != j)
                .map(|k| next.estimates[k.0] * row[k.0])
                .sum();
            let base = frozen + mass * row[j.0];
            let slope = mass * (row[i.0] - row[j.0]);
            let r = slope / base;
            if base >= LogProduct::TINY && r.abs() <= SERIES_RADIUS {
                let mut rp = r;
                for p in power_sums.iter_mut() {
                    *p += rp;
                    rp *= r;
                }
            } else {
                exact.push((base, slope, n));
            }
        }
        let mut weights = next.estimates.clone();
        for (g, lp) in log_post.iter_mut().enumerate() {
            let t = g as f64 * h;
            let mut series = 0.0;
            let mut tp = t;
            for (k, p) in power_sums.iter().enumerate() {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                series += sign * p * tp / (k + 1) as f64;
                tp *= t;
            }
            let mut acc = LogProduct::new();
            for &(base, slope, n) in &exact {
                let q = base + t * slope;
                if q >= LogProduct::TINY {
                    acc.mul(q);
                } else {
                    weights[i.0] = t * mass;
                    weights[j.0] = (1.0 - t) * mass;
                    acc.add_log(table.exact_shifted_log(n, &weights));
                }
            }
            *lp = acc.ln() + series;
        }
        let logs: Vec<f64> = trap.iter().zip(&log_post).map(|(w, l)| w.ln() + l).collect();
        let z = log_sum_exp(&logs);
        let (mut m1, mut m2) = (0.0, 0.0);
        for (g, l) in logs.iter().enumerate() {
            let p = (l - z).exp();
            let t = g as f64 * h;
            m1 += p * t;
            m2 += p * t * t;
        }
        let t_mean = m1.clamp(0.0, 1.0);
        let t_sd = (m2 - t_mean * t_mean).max(0.0).sqrt();
        next.estimates[i.0] = t_mean * mass;
        next.estimates[j.0] = mass - next.estimates[i.0];
        next.std_devs[i.0] = t_sd * mass;
        next.std_devs[j.0] = t_sd * mass;
    }
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxSweeps,
    /// Only one state is active; it takes all the population.
    SingleState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseOutcome {
    pub state: PairwiseState,
    pub sweeps: usize,
    pub stop_reason: StopReason,
    /// Largest per-state change in the final sweep.
    pub last_change: f64,
}

/// Sweeps until no estimate changes by `epsilon` or more, or until
/// `max_sweeps` sweeps have run.
pub fn iterate_pairwise(
    state: &PairwiseState,
    models: &[QubitResponseModel],
    shots: &Shots,
    grid_points: usize,
) -> Result<PairwiseOutcome> {
    check_inputs(state, models, shots, grid_points)?;
    if state.active_set.len() == 1 {
        let mut s = state.clone();
        s.estimates.iter_mut().for_each(|r| *r = 0.0);
        s.std_devs.iter_mut().for_each(|r| *r = 0.0);
        s.estimates[s.active_set[0].0] = 1.0;
        return Ok(PairwiseOutcome {
            state: s,
            sweeps: 0,
            stop_reason: StopReason::SingleState,
            last_change: 0.0,
        });
    }
    if state.max_sweeps == 0 {
        return Ok(PairwiseOutcome {
            state: state.clone(),
            sweeps: 0,
            stop_reason: StopReason::MaxSweeps,
            last_change: f64::NAN,
        });
    }
    let table = basis_table(models, shots)?;
    let mut current = state.clone();
    let mut last_change = f64::INFINITY;
    for sweep in 1..=state.max_sweeps {
        let next = sweep_with_table(&current, &table, grid_points);
        last_change = next
            .estimates
            .iter()
            .zip(&current.estimates)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        current = next;
        if last_change < state.epsilon {
            return Ok(PairwiseOutcome {
                state: current,
                sweeps: sweep,
                stop_reason: StopReason::Converged,
                last_change,
            });
        }
    }
    Ok(PairwiseOutcome {
        state: current,
        sweeps: state.max_sweeps,
        stop_reason: StopReason::MaxSweeps,
        last_change,
    })
}
