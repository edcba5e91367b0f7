//! Multi-qubit population inference.
//!
//! Basis state `i` of an `N`-qubit register has response
//! `P_i(x) = Π_k P_{bit_k(i)}(x_k)` for independent per-qubit detectors.
//! Two estimators are provided: the exact joint posterior on a lattice over
//! the population simplex ([`joint`], at most two qubits) and the pairwise
//! heuristic that freezes all but two populations at a time
//! ([`pairwise`]).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::detector::QubitResponseModel;
use crate::error::{Error, Result};
use crate::likelihood::LikelihoodTable;
use crate::shots::Shots;

pub mod joint;
pub mod pairwise;

pub use joint::{joint_update, SimplexPosterior};
pub use pairwise::{
    iterate_pairwise, pairwise_conditional_log, pairwise_sweep, prune_active_set, PairwiseOutcome,
    PairwiseState, StopReason,
};

/// Computational basis index. Qubit 1 is the most significant bit, so the
/// bitstring reads left to right in qubit order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BasisIndex(pub usize);

impl BasisIndex {
    pub fn new(value: usize, n_qubits: usize) -> Result<Self> {
        if value >= 1 << n_qubits {
            return Err(Error::InvalidInput(format!(
                "basis index {value} out of range for {n_qubits} qubits"
            )));
        }
        Ok(Self(value))
    }

    pub fn from_bitstring(bits: &str) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InvalidInput("empty bitstring".into()));
        }
        let mut v = 0usize;
        for c in bits.chars() {
            v = (v << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(Error::InvalidInput(format!("invalid bitstring `{bits}`"))),
                };
        }
        Ok(Self(v))
    }

    /// State of qubit `k` (0-based, leftmost first).
    #[inline]
    pub fn bit(self, k: usize, n_qubits: usize) -> bool {
        (self.0 >> (n_qubits - 1 - k)) & 1 == 1
    }

    pub fn bitstring(self, n_qubits: usize) -> String {
        (0..n_qubits)
            .map(|k| if self.bit(k, n_qubits) { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Display for BasisIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `Σ_k log P_{bit_k(state)}(x_k)`.
pub fn basis_log_density(
    models: &[QubitResponseModel],
    state: BasisIndex,
    x_vec: &[f64],
) -> Result<f64> {
    if x_vec.len() != models.len() {
        return Err(Error::DimensionMismatch {
            expected: models.len(),
            got: x_vec.len(),
        });
    }
    let n = models.len();
    let state = BasisIndex::new(state.0, n)?;
    Ok(models
        .iter()
        .zip(x_vec)
        .enumerate()
        .map(|(k, (m, &x))| m.response(state.bit(k, n)).log_density(x))
        .sum())
}

/// Likelihood table over all `2^N` basis states for a batch of shots.
pub fn basis_table(models: &[QubitResponseModel], shots: &Shots) -> Result<LikelihoodTable> {
    let n = models.len();
    if shots.n_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: shots.n_qubits(),
        });
    }
    let k = 1usize << n;
    let mut per_qubit = vec![[0.0; 2]; n];
    let mut row = vec![0.0; k];
    let rows: Vec<Vec<f64>> = shots
        .rows()
        .map(|x| {
            for (q, m) in models.iter().enumerate() {
                per_qubit[q] = [m.p_g.log_density(x[q]), m.p_e.log_density(x[q])];
            }
            for (s, r) in row.iter_mut().enumerate() {
                let idx = BasisIndex(s);
                *r = (0..n).map(|q| per_qubit[q][usize::from(idx.bit(q, n))]).sum();
            }
            row.clone()
        })
        .collect();
    Ok(LikelihoodTable::from_log_rows(k, rows))
}
