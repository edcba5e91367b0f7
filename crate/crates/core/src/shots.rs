use serde::{Deserialize, Serialize};

use crate::detector::IQShot;
use crate::error::{Error, Result};

/// Projected detector values, one row per shot and one column per qubit.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Shots {
    n_qubits: usize,
    values: Vec<f64>,
}

impl Shots {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            values: Vec::new(),
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(n_qubits: usize, rows: &[R]) -> Result<Self> {
        let mut s = Self::new(n_qubits);
        for r in rows {
            s.push(r.as_ref())?;
        }
        Ok(s)
    }

    /// Single-qubit shots.
    pub fn from_column(values: &[f64]) -> Self {
        Self {
            n_qubits: 1,
            values: values.to_vec(),
        }
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                got: row.len(),
            });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite detector value".into()));
        }
        self.values.extend_from_slice(row);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.values.len().checked_div(self.n_qubits).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.n_qubits..(n + 1) * self.n_qubits]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_qubits.max(1))
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    /// First `n` shots.
    pub fn truncated(&self, n: usize) -> Shots {
        let n = n.min(self.len());
        Shots {
            n_qubits: self.n_qubits,
            values: self.values[..n * self.n_qubits].to_vec(),
        }
    }
}

/// One measurement record: raw IQ points or projected scalars, per qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ShotRecord {
    Raw(Vec<IQShot>),
    Projected(Vec<f64>),
}
