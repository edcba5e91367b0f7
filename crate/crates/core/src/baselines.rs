//! Reference discriminators: single-shot threshold assignment and
//! confusion-matrix inversion of the resulting counts.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::detector::QubitResponseModel;
use crate::error::{Error, Result};
use crate::multiqubit::BasisIndex;
use crate::shots::Shots;

const BISECTION_TOLERANCE: f64 = 1e-10;
/// Inverse condition numbers below this are treated as singular.
const SINGULAR_RCOND: f64 = 1e-12;

/// Histogram over basis states, indexed like [`BasisIndex`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    n_qubits: usize,
    counts: Vec<u64>,
}

impl Counts {
    pub fn zeros(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            counts: vec![0; 1 << n_qubits],
        }
    }

    pub fn from_vec(n_qubits: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != 1 << n_qubits {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_qubits,
                got: counts.len(),
            });
        }
        Ok(Self { n_qubits, counts })
    }

    /// Parses a `bitstring → count` map; missing bitstrings count zero.
    pub fn from_map(n_qubits: usize, map: &BTreeMap<String, u64>) -> Result<Self> {
        let mut c = Self::zeros(n_qubits);
        for (bits, &v) in map {
            if bits.len() != n_qubits {
                return Err(Error::InvalidInput(format!(
                    "bitstring `{bits}` does not have {n_qubits} qubits"
                )));
            }
            c.counts[BasisIndex::from_bitstring(bits)?.0] += v;
        }
        Ok(c)
    }

    pub fn to_map(&self) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .enumerate()
            .map(|(s, &v)| (BasisIndex(s).bitstring(self.n_qubits), v))
            .collect()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, state: BasisIndex) -> u64 {
        self.counts[state.0]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts divided by the total; all zeros for an empty histogram.
    pub fn fractions(&self) -> Vec<f64> {
        let total = self.total();
        if total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / total as f64).collect()
    }
}

/// Single-shot decision boundary on the projected axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separatrix {
    pub threshold: f64,
    /// Values at or below the threshold are assigned "0" when true.
    pub ground_below: bool,
}

impl Separatrix {
    #[inline]
    pub fn assign(&self, x: f64) -> bool {
        (x > self.threshold) == self.ground_below
    }

    /// Probabilities of assigning the wrong bit, `(given ground, given excited)`.
    pub fn misassignment(&self, model: &QubitResponseModel) -> (f64, f64) {
        let below_g = model.p_g.cdf(self.threshold);
        let below_e = model.p_e.cdf(self.threshold);
        if self.ground_below {
            (1.0 - below_g, below_e)
        } else {
            (below_g, 1.0 - below_e)
        }
    }
}

/// Equal-likelihood point of `P_g` and `P_e` between the two main peaks.
pub fn fit_separatrix(model: &QubitResponseModel) -> Result<Separatrix> {
    let ratio = |x: f64| model.p_g.log_density(x) - model.p_e.log_density(x);
    let (mut lo, mut hi) = (model.p_g.main.mean, model.p_e.main.mean);
    let (flo, fhi) = (ratio(lo), ratio(hi));
    if !(flo.is_finite() && fhi.is_finite()) || flo * fhi >= 0.0 {
        return Err(Error::NoCrossing);
    }
    let lo_positive = flo > 0.0;
    while (hi - lo).abs() > BISECTION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        let f = ratio(mid);
        if f == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (f > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Separatrix {
        threshold: 0.5 * (lo + hi),
        ground_below: model.p_g.main.mean < model.p_e.main.mean,
    })
}

/// Threshold assignment of every shot, one separatrix per qubit.
pub fn assign_counts(separatrices: &[Separatrix], shots: &Shots) -> Result<Counts> {
    let n = separatrices.len();
    if shots.n_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: shots.n_qubits(),
        });
    }
    let mut counts = Counts::zeros(n);
    for row in shots.rows() {
        let s = row
            .iter()
            .zip(separatrices)
            .fold(0usize, |acc, (&x, sep)| (acc << 1) | usize::from(sep.assign(x)));
        counts.counts[s] += 1;
    }
    Ok(counts)
}

/// `entries[(a, b)] = P(assigned a | prepared b)` on the full register.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    n_qubits: usize,
    entries: DMatrix<f64>,
}

impl ConfusionMatrix {
    /// Kronecker product of per-qubit matrices, qubit 1 outermost.
    pub fn from_per_qubit(per_qubit: &[Matrix2<f64>]) -> Result<Self> {
        if per_qubit.is_empty() {
            return Err(Error::InvalidInput("confusion matrix needs at least one qubit".into()));
        }
        let mut entries = DMatrix::from_element(1, 1, 1.0);
        for m in per_qubit {
            for col in 0..2 {
                let sum = m[(0, col)] + m[(1, col)];
                if (sum - 1.0).abs() > 1e-9 || m.column(col).iter().any(|v| *v < 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "confusion column {col} is not a probability vector"
                    )));
                }
            }
            let dm = DMatrix::from_column_slice(2, 2, m.as_slice());
            entries = entries.kronecker(&dm);
        }
        Ok(Self {
            n_qubits: per_qubit.len(),
            entries,
        })
    }

    /// Per-qubit matrices from the analytic misassignment of each model at
    /// its separatrix.
    pub fn from_models(models: &[QubitResponseModel], separatrices: &[Separatrix]) -> Result<Self> {
        if models.len() != separatrices.len() {
            return Err(Error::DimensionMismatch {
                expected: models.len(),
                got: separatrices.len(),
            });
        }
        let per_qubit: Vec<Matrix2<f64>> = models
            .iter()
            .zip(separatrices)
            .map(|(m, s)| {
                let (eg, ee) = s.misassignment(m);
                Matrix2::new(1.0 - eg, ee, eg, 1.0 - ee)
            })
            .collect();
        Self::from_per_qubit(&per_qubit)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Expected assignment distribution for true populations.
    pub fn apply(&self, populations: &[f64]) -> Result<Vec<f64>> {
        self.check_len(populations.len())?;
        Ok((&self.entries * DVector::from_column_slice(populations))
            .iter()
            .copied()
            .collect())
    }

    /// Ratio of largest to smallest singular value.
    pub fn condition_number(&self) -> f64 {
        let sv = self.entries.singular_values();
        let max = sv.max();
        let min = sv.min();
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }

    /// `M⁻¹·v` without any clipping of the result.
    pub fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v.len())?;
        let condition = self.condition_number();
        if !(condition.is_finite() && 1.0 / condition > SINGULAR_RCOND) {
            return Err(Error::SingularMatrix { condition });
        }
        self.entries
            .clone()
            .lu()
            .solve(&DVector::from_column_slice(v))
            .map(|x| x.iter().copied().collect())
            .ok_or(Error::SingularMatrix { condition })
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.entries.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.entries.nrows(),
                got,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionResult {
    /// May contain entries outside `[0, 1]`.
    pub quasi_populations: Vec<f64>,
    pub condition_number: f64,
    /// Multinomial count noise propagated through the inverse.
    pub std_devs: Vec<f64>,
}

/// `M⁻¹·(counts/N)`.
pub fn invert_confusion(counts: &Counts, confusion: &ConfusionMatrix) -> Result<InversionResult> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::EmptyCounts);
    }
    let f = counts.fractions();
    let quasi_populations = confusion.solve(&f)?;
    let condition_number = confusion.condition_number();

    let k = f.len();
    let inv = confusion
        .entries
        .clone()
        .try_inverse()
        .ok_or(Error::SingularMatrix {
            condition: condition_number,
        })?;
    let fv = DVector::from_column_slice(&f);
    let sigma = (DMatrix::from_diagonal(&fv) - &fv * fv.transpose()) / total as f64;
    let cov = &inv * sigma * inv.transpose();
    let std_devs = (0..k).map(|s| cov[(s, s)].max(0.0).sqrt()).collect();
    Ok(InversionResult {
        quasi_populations,
        condition_number,
        std_devs,
    })
}
