//! Running every estimator on one batch of shots.
//!
//! BaLeRO dispatches on register size: the 1D grid posterior for a single
//! qubit, the exact simplex posterior for two, and the pairwise heuristic
//! seeded from threshold counts beyond that.

use serde::{Deserialize, Serialize};

use crate::baselines::{
    assign_counts, fit_separatrix, invert_confusion, ConfusionMatrix, Counts, InversionResult,
    Separatrix,
};
use crate::detector::QubitResponseModel;
use crate::error::{Error, Result};
use crate::multiqubit::joint::{DEFAULT_TWO_QUBIT_RESOLUTION, MAX_JOINT_QUBITS};
use crate::multiqubit::pairwise::{DEFAULT_EPSILON, DEFAULT_MAX_SWEEPS, DEFAULT_PAIR_GRID_POINTS};
use crate::multiqubit::{iterate_pairwise, joint_update, prune_active_set, SimplexPosterior, StopReason};
use crate::posterior::{uniform_prior, update_posterior, PopulationEstimate, PosteriorGrid1D, DEFAULT_GRID_POINTS};
use crate::shots::Shots;

/// Numerical settings shared by all BaLeRO paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSettings {
    /// Points of the single-qubit `ρ_g` grid.
    pub grid_points: usize,
    /// Lattice divisions per axis of the two-qubit simplex.
    pub joint_resolution: usize,
    /// Points of the pair grid in the pairwise heuristic.
    pub pair_grid_points: usize,
    pub epsilon: f64,
    pub max_sweeps: usize,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            grid_points: DEFAULT_GRID_POINTS,
            joint_resolution: DEFAULT_TWO_QUBIT_RESOLUTION,
            pair_grid_points: DEFAULT_PAIR_GRID_POINTS,
            epsilon: DEFAULT_EPSILON,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

impl EstimatorSettings {
    pub fn validate(&self) -> Result<()> {
        for n in [self.grid_points, self.pair_grid_points] {
            if n < 3 {
                return Err(Error::InvalidResolution(n));
            }
        }
        if self.joint_resolution < 2 {
            return Err(Error::InvalidResolution(self.joint_resolution));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaleroMethod {
    SingleQubit,
    ExactJoint,
    Pairwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub sweeps: usize,
    pub stop_reason: StopReason,
    pub epsilon: f64,
    pub last_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaleroResult {
    pub method: BaleroMethod,
    pub estimate: PopulationEstimate,
    /// Present for the pairwise path.
    pub convergence: Option<Convergence>,
    /// Present for a single qubit.
    pub posterior: Option<PosteriorGrid1D>,
}

impl BaleroResult {
    pub fn hit_max_sweeps(&self) -> bool {
        self.convergence
            .is_some_and(|c| c.stop_reason == StopReason::MaxSweeps)
    }
}

/// Calibrated register with its derived threshold baseline.
#[derive(Debug, Clone)]
pub struct Readout {
    pub models: Vec<QubitResponseModel>,
    pub separatrices: Vec<Separatrix>,
    pub confusion: ConfusionMatrix,
}

impl Readout {
    pub fn new(models: Vec<QubitResponseModel>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidInput("no qubit models".into()));
        }
        let separatrices = models.iter().map(fit_separatrix).collect::<Result<Vec<_>>>()?;
        let confusion = ConfusionMatrix::from_models(&models, &separatrices)?;
        Ok(Self {
            models,
            separatrices,
            confusion,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.models.len()
    }

    pub fn counts(&self, shots: &Shots) -> Result<Counts> {
        assign_counts(&self.separatrices, shots)
    }

    pub fn inversion(&self, counts: &Counts) -> Result<InversionResult> {
        invert_confusion(counts, &self.confusion)
    }

    pub fn balero(&self, shots: &Shots, settings: &EstimatorSettings) -> Result<BaleroResult> {
        settings.validate()?;
        if shots.n_qubits() != self.n_qubits() {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits(),
                got: shots.n_qubits(),
            });
        }
        match self.n_qubits() {
            1 => {
                let post = update_posterior(
                    &uniform_prior(settings.grid_points)?,
                    &self.models[0],
                    &shots.column(0),
                )?;
                Ok(BaleroResult {
                    method: BaleroMethod::SingleQubit,
                    estimate: post.estimate(),
                    convergence: None,
                    posterior: Some(post),
                })
            }
            n if n <= MAX_JOINT_QUBITS => {
                let prior = SimplexPosterior::uniform(n, settings.joint_resolution)?;
                let post = joint_update(&prior, &self.models, shots)?;
                Ok(BaleroResult {
                    method: BaleroMethod::ExactJoint,
                    estimate: post.estimate(),
                    convergence: None,
                    posterior: None,
                })
            }
            _ => {
                let counts = self.counts(shots)?;
                let start = prune_active_set(&counts)?
                    .with_epsilon(settings.epsilon)?
                    .with_max_sweeps(settings.max_sweeps);
                let out = iterate_pairwise(&start, &self.models, shots, settings.pair_grid_points)?;
                Ok(BaleroResult {
                    method: BaleroMethod::Pairwise,
                    estimate: PopulationEstimate::new(
                        out.state.estimates().to_vec(),
                        out.state.std_devs().to_vec(),
                    )?,
                    convergence: Some(Convergence {
                        sweeps: out.sweeps,
                        stop_reason: out.stop_reason,
                        epsilon: settings.epsilon,
                        last_change: out.last_change,
                    }),
                    posterior: None,
                })
            }
        }
    }
}

/// Binomial standard errors of count fractions.
pub fn count_std_devs(counts: &Counts) -> Vec<f64> {
    let n = counts.total() as f64;
    counts
        .fractions()
        .iter()
        .map(|f| (f * (1.0 - f) / n).sqrt())
        .collect()
}
