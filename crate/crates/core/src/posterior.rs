//! Single-qubit population inference on the `ρ_g + ρ_e = 1` segment.
//!
//! The posterior over `ρ_g ∈ [0, 1]` lives on a uniform grid as normalized
//! log-densities. A batch of shots adds `Σ_n log(ρ_g·P_g(x_n) + (1 − ρ_g)·P_e(x_n))`
//! to every node and renormalizes once, which is the sequential Bayes update
//! applied shot after shot.

use serde::{Deserialize, Serialize};

use crate::detector::QubitResponseModel;
use crate::error::{Error, Result};
use crate::likelihood::LikelihoodTable;
use crate::numeric::{log_add_exp, log_sum_exp, trapezoid_weights, LogProduct};

pub const DEFAULT_GRID_POINTS: usize = 1001;

/// Population vector over computational basis states with posterior
/// standard deviations. Entries are ordered by basis index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationEstimate {
    pub populations: Vec<f64>,
    pub std_devs: Vec<f64>,
}

impl PopulationEstimate {
    pub fn new(populations: Vec<f64>, std_devs: Vec<f64>) -> Result<Self> {
        if populations.len() != std_devs.len() {
            return Err(Error::DimensionMismatch {
                expected: populations.len(),
                got: std_devs.len(),
            });
        }
        Ok(Self {
            populations,
            std_devs,
        })
    }

    pub fn len(&self) -> usize {
        self.populations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.populations.is_empty()
    }

    /// Every entry in `[0, 1]` and the sum within `tol` of one.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.populations.iter().all(|p| (0.0..=1.0).contains(p))
            && (self.populations.iter().sum::<f64>() - 1.0).abs() <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid1D {
    log_weights: Vec<f64>,
}

impl PosteriorGrid1D {
    /// Normalizes arbitrary finite log-weights into a posterior.
    pub fn from_log_weights(log_weights: Vec<f64>) -> Result<Self> {
        if log_weights.len() < 3 {
            return Err(Error::InvalidResolution(log_weights.len()));
        }
        if log_weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("non-finite posterior log-weight".into()));
        }
        let mut g = Self { log_weights };
        g.normalize();
        Ok(g)
    }

    pub fn n_points(&self) -> usize {
        self.log_weights.len()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Grid abscissa `ρ_g` of node `k`.
    pub fn rho(&self, k: usize) -> f64 {
        k as f64 / (self.n_points() - 1) as f64
    }

    pub fn densities(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    /// Trapezoidal integral of the density over `[0, 1]`.
    pub fn total_mass(&self) -> f64 {
        trapezoid_weights(self.n_points())
            .iter()
            .zip(&self.log_weights)
            .map(|(w, l)| w * l.exp())
            .sum()
    }

    fn normalize(&mut self) {
        let logs: Vec<f64> = trapezoid_weights(self.n_points())
            .iter()
            .zip(&self.log_weights)
            .map(|(w, l)| w.ln() + l)
            .collect();
        let z = log_sum_exp(&logs);
        for l in &mut self.log_weights {
            *l -= z;
        }
    }

    /// Grid node with the largest posterior density.
    pub fn mode(&self) -> f64 {
        let k = self
            .log_weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        self.rho(k)
    }

    pub fn update(&self, model: &QubitResponseModel, shots: &[f64]) -> Result<Self> {
        update_posterior(self, model, shots)
    }

    pub fn estimate(&self) -> PopulationEstimate {
        estimate(self)
    }
}

/// Flat prior over `ρ_g`.
pub fn uniform_prior(n_points: usize) -> Result<PosteriorGrid1D> {
    if n_points < 3 {
        return Err(Error::InvalidResolution(n_points));
    }
    PosteriorGrid1D::from_log_weights(vec![0.0; n_points])
}

/// `log(ρ_g·P_g(x) + (1 − ρ_g)·P_e(x))`.
pub fn log_likelihood_single(model: &QubitResponseModel, rho_g: f64, x: f64) -> f64 {
    log_add_exp(
        rho_g.ln() + model.p_g.log_density(x),
        (1.0 - rho_g).ln() + model.p_e.log_density(x),
    )
}

pub(crate) fn single_qubit_table(model: &QubitResponseModel, shots: &[f64]) -> LikelihoodTable {
    LikelihoodTable::from_log_rows(
        2,
        shots
            .iter()
            .map(|&x| [model.p_g.log_density(x), model.p_e.log_density(x)]),
    )
}

/// Log-likelihood of all shots at every node of a `n_points` grid.
pub(crate) fn grid_log_likelihood(table: &LikelihoodTable, n_points: usize) -> Vec<f64> {
    let n_shots = table.n_shots();
    let mut ground = Vec::with_capacity(n_shots);
    let mut excited = Vec::with_capacity(n_shots);
    for n in 0..n_shots {
        let r = table.scaled_row(n);
        ground.push(r[0]);
        excited.push(r[1]);
    }
    let h = 1.0 / (n_points - 1) as f64;
    (0..n_points)
        .map(|k| {
            let rho = k as f64 * h;
            let mut acc = LogProduct::new();
            for n in 0..n_shots {
                let q = excited[n] + rho * (ground[n] - excited[n]);
                if q >= LogProduct::TINY {
                    acc.mul(q);
                } else {
                    acc.add_log(table.exact_shifted_log(n, &[rho, 1.0 - rho]));
                }
            }
            acc.ln() + table.shift_total()
        })
        .collect()
}

/// Posterior after observing `shots` (projected detector values).
pub fn update_posterior(
    grid: &PosteriorGrid1D,
    model: &QubitResponseModel,
    shots: &[f64],
) -> Result<PosteriorGrid1D> {
    if shots.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite shot".into()));
    }
    if shots.is_empty() {
        return Ok(grid.clone());
    }
    let table = single_qubit_table(model, shots);
    let ll = grid_log_likelihood(&table, grid.n_points());
    PosteriorGrid1D::from_log_weights(
        grid.log_weights.iter().zip(ll).map(|(a, b)| a + b).collect(),
    )
}

/// Posterior mean and standard deviation of `(ρ_g, ρ_e)`.
pub fn estimate(grid: &PosteriorGrid1D) -> PopulationEstimate {
    let w = trapezoid_weights(grid.n_points());
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (k, (wk, l)) in w.iter().zip(&grid.log_weights).enumerate() {
        let p = wk * l.exp();
        let rho = grid.rho(k);
        m0 += p;
        m1 += p * rho;
        m2 += p * rho * rho;
    }
    let mean = (m1 / m0).clamp(0.0, 1.0);
    let sd = (m2 / m0 - mean * mean).max(0.0).sqrt();
    PopulationEstimate {
        populations: vec![mean, 1.0 - mean],
        std_devs: vec![sd, sd],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{BimodalResponse, GaussianComponent, ProjectionSpec};
    use proptest::prelude::*;

    fn model(mg: f64, me: f64, std: f64) -> QubitResponseModel {
        QubitResponseModel::new(
            "q0",
            ProjectionSpec::IDENTITY,
            BimodalResponse::unimodal(GaussianComponent::new(mg, std).unwrap()),
            BimodalResponse::unimodal(GaussianComponent::new(me, std).unwrap()),
        )
        .unwrap()
    }

    fn leaky_model() -> QubitResponseModel {
        QubitResponseModel::new(
            "q0",
            ProjectionSpec::IDENTITY,
            BimodalResponse::new(
                GaussianComponent::new(-1.0, 0.8).unwrap(),
                GaussianComponent::new(1.2, 0.9).unwrap(),
                0.04,
            )
            .unwrap(),
            BimodalResponse::new(
                GaussianComponent::new(1.1, 0.9).unwrap(),
                GaussianComponent::new(-0.9, 1.0).unwrap(),
                0.07,
            )
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn uniform_prior_examples() {
        let g = uniform_prior(5).unwrap();
        for d in g.densities() {
            assert!((d - 1.0).abs() < 1e-15);
        }
        let g = uniform_prior(1001).unwrap();
        assert!((g.total_mass() - 1.0).abs() < 1e-12);
        assert!(matches!(uniform_prior(2), Err(Error::InvalidResolution(2))));
    }

    #[test]
    fn single_likelihood_limits() {
        let m = leaky_model();
        for x in [-2.0, 0.0, 0.3, 4.0] {
            assert_eq!(log_likelihood_single(&m, 1.0, x), m.p_g.log_density(x));
            assert_eq!(log_likelihood_single(&m, 0.0, x), m.p_e.log_density(x));
        }
        let m = model(0.0, 2.0, 1.0);
        assert!((log_likelihood_single(&m, 0.5, 1.0) - (-1.418_938_533_204_672_7)).abs() < 1e-12);
    }

    #[test]
    fn empty_update_is_identity() {
        let g = uniform_prior(11).unwrap();
        assert_eq!(update_posterior(&g, &leaky_model(), &[]).unwrap(), g);
    }

    #[test]
    fn brute_force_product_on_five_points() {
        let m = leaky_model();
        let shots = [-0.7, 0.4, 1.9];
        let g = update_posterior(&uniform_prior(5).unwrap(), &m, &shots).unwrap();
        // normalized product of mixture densities, trapezoid on 5 nodes
        let rho = [0.0, 0.25, 0.5, 0.75, 1.0];
        let unnorm: Vec<f64> = rho
            .iter()
            .map(|&r| {
                shots
                    .iter()
                    .map(|&x| r * m.p_g.density(x) + (1.0 - r) * m.p_e.density(x))
                    .product::<f64>()
            })
            .collect();
        let z: f64 = [0.125, 0.25, 0.25, 0.25, 0.125]
            .iter()
            .zip(&unnorm)
            .map(|(w, u)| w * u)
            .sum();
        for (d, u) in g.densities().iter().zip(&unnorm) {
            assert!((d - u / z).abs() < 1e-12, "{d} vs {}", u / z);
        }
    }

    #[test]
    fn disjoint_supports_concentrate() {
        let m = model(-50.0, 50.0, 1.0);
        let shots: Vec<f64> = (0..100).map(|k| -50.0 + 0.01 * k as f64).collect();
        let g = update_posterior(&uniform_prior(1001).unwrap(), &m, &shots).unwrap();
        assert!(g.log_weights().iter().all(|w| w.is_finite()));
        assert!(estimate(&g).populations[0] > 0.99);
    }

    #[test]
    fn estimate_examples() {
        let e = estimate(&uniform_prior(1001).unwrap());
        assert!((e.populations[0] - 0.5).abs() < 1e-12);
        assert!((e.std_devs[0] - 1.0 / 12f64.sqrt()).abs() < 1e-6);

        let mut lw = vec![-1e3; 101];
        lw[100] = 0.0;
        let e = estimate(&PosteriorGrid1D::from_log_weights(lw).unwrap());
        assert!((e.populations[0] - 1.0).abs() < 0.01);
        assert!(e.populations[1] >= 0.0);

        // density proportional to rho: mean = ∫ρ·2ρ dρ = 2/3
        let lw: Vec<f64> = (0..1001)
            .map(|k| if k == 0 { -1e3 } else { (k as f64 / 1000.0).ln() })
            .collect();
        let e = estimate(&PosteriorGrid1D::from_log_weights(lw).unwrap());
        assert!((e.populations[0] - 2.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn mean_matches_beta_posterior_for_separated_detector() {
        let m = model(-50.0, 50.0, 1.0);
        // 7 ground-side shots out of 10: Beta(8, 4) mean 8/12
        let shots: Vec<f64> = (0..10).map(|k| if k < 7 { -50.0 } else { 50.0 }).collect();
        let g = update_posterior(&uniform_prior(1001).unwrap(), &m, &shots).unwrap();
        assert!((estimate(&g).populations[0] - 8.0 / 12.0).abs() < 1e-5);
        assert!((g.mode() - 0.7).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn shot_order_invariance(
            shots in proptest::collection::vec(-4.0f64..4.0, 1..60),
            rot in 0usize..60,
        ) {
            let m = leaky_model();
            let prior = uniform_prior(101).unwrap();
            let a = update_posterior(&prior, &m, &shots).unwrap();
            let mut perm = shots.clone();
            perm.reverse();
            let r = rot % perm.len();
            perm.rotate_left(r);
            let b = update_posterior(&prior, &m, &perm).unwrap();
            for (x, y) in a.log_weights().iter().zip(b.log_weights()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn batch_equals_sequential(shots in proptest::collection::vec(-4.0f64..4.0, 1..30)) {
            let m = leaky_model();
            let prior = uniform_prior(101).unwrap();
            let batch = update_posterior(&prior, &m, &shots).unwrap();
            let mut seq = prior;
            for x in &shots {
                seq = update_posterior(&seq, &m, std::slice::from_ref(x)).unwrap();
            }
            for (x, y) in batch.log_weights().iter().zip(seq.log_weights()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn estimate_is_physical(shots in proptest::collection::vec(-6.0f64..6.0, 0..200)) {
            let m = leaky_model();
            let g = update_posterior(&uniform_prior(201).unwrap(), &m, &shots).unwrap();
            prop_assert!((g.total_mass() - 1.0).abs() < 1e-9);
            let e = estimate(&g);
            prop_assert!(e.is_physical(1e-12));
        }
    }
}
