//! Bayesian readout post-processing for qubit registers.
//!
//! The crate calibrates per-qubit detector response functions from
//! prepared-state shots, then turns raw measurement records into population
//! estimates by Bayesian updating over the population simplex. Threshold
//! counting and confusion-matrix inversion are included as baselines, along
//! with a simulator for synthetic experiments and the metrics used to
//! compare estimators.

pub mod baselines;
pub mod cli;
pub mod detector;
pub mod estimators;
pub mod error;
pub mod io;
pub mod likelihood;
pub mod metrics;
pub mod mixture;
pub mod multiqubit;
pub mod numeric;
pub mod posterior;
pub mod scenario;
pub mod shots;
pub mod simulator;

pub use baselines::{
    assign_counts, fit_separatrix, invert_confusion, ConfusionMatrix, Counts, InversionResult,
    Separatrix,
};
pub use detector::{
    calibrate_qubit, eval_log_density, fit_projection, project, BimodalResponse,
    CalibrationDataset, GaussianComponent, IQShot, ProjectionSpec, QubitResponseModel,
};
pub use error::{Error, Result};
pub use metrics::{
    avg_ground_population_error, readout_error, total_population_error, Estimator, MetricReport,
};
pub use mixture::fit_bimodal;
pub use multiqubit::{
    basis_log_density, iterate_pairwise, joint_update, pairwise_conditional_log, pairwise_sweep,
    prune_active_set, BasisIndex, PairwiseOutcome, PairwiseState, SimplexPosterior, StopReason,
};
pub use posterior::{
    estimate, log_likelihood_single, uniform_prior, update_posterior, PopulationEstimate,
    PosteriorGrid1D,
};
pub use shots::Shots;
pub use simulator::{
    apply_depolarizing, bell_populations, bitstring_populations, ry_populations, sample_shots,
    DetectorPreset, NoiseConfig, TrueState,
};
