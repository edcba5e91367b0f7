//! Figures of merit for comparing population estimators.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Balero,
    Counts,
    Inversion,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Balero, Estimator::Counts, Estimator::Inversion];

    pub fn label(self) -> &'static str {
        match self {
            Estimator::Balero => "balero",
            Estimator::Counts => "counts",
            Estimator::Inversion => "inversion",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.label() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown estimator `{s}`")))
    }
}

/// One row of the benchmark metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub estimator: Estimator,
    pub n_shots: usize,
    pub seed: u64,
    pub value: f64,
}

/// `Σ_i |exact_i − estimated_i|`.
pub fn total_population_error(exact: &[f64], estimated: &[f64]) -> Result<f64> {
    if exact.len() != estimated.len() {
        return Err(Error::DimensionMismatch {
            expected: exact.len(),
            got: estimated.len(),
        });
    }
    Ok(exact.iter().zip(estimated).map(|(a, b)| (a - b).abs()).sum())
}

/// `(1/2π) ∫ |cos²(θ/2) − ρ_g(θ)| dθ` by the trapezoid rule.
///
/// The grid must be increasing and lie in `[0, 2π]`. A grid that starts at
/// 0 and stops one step short of 2π is treated as periodic and the closing
/// interval back to 2π is included. A grid that ends at 2π is integrated as
/// given.
pub fn avg_ground_population_error(theta: &[f64], estimates: &[f64]) -> Result<f64> {
    if theta.len() != estimates.len() {
        return Err(Error::GridMismatch(format!(
            "{} θ values but {} estimates",
            theta.len(),
            estimates.len()
        )));
    }
    if theta.len() < 2 {
        return Err(Error::GridMismatch("need at least two θ values".into()));
    }
    let two_pi = 2.0 * PI;
    if theta.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::GridMismatch("θ grid must be strictly increasing".into()));
    }
    if theta[0].abs() > 1e-12 || theta[theta.len() - 1] > two_pi + 1e-12 {
        return Err(Error::GridMismatch("θ grid must span [0, 2π)".into()));
    }
    let dev: Vec<f64> = theta
        .iter()
        .zip(estimates)
        .map(|(t, r)| ((t / 2.0).cos().powi(2) - r).abs())
        .collect();
    let mut integral: f64 = theta
        .windows(2)
        .zip(dev.windows(2))
        .map(|(t, d)| 0.5 * (t[1] - t[0]) * (d[0] + d[1]))
        .sum();
    let last = theta[theta.len() - 1];
    if (last - two_pi).abs() > 1e-12 {
        let step = theta[1] - theta[0];
        if (two_pi - last - step).abs() > 1e-9 * two_pi {
            return Err(Error::GridMismatch(
                "θ grid neither ends at 2π nor stops one step short of it".into(),
            ));
        }
        integral += 0.5 * (two_pi - last) * (dev[dev.len() - 1] + dev[0]);
    }
    Ok(integral / two_pi)
}

/// `1 − (ρ̂_g|g + ρ̂_e|e)/2` from the estimates after ground and excited
/// preparation.
pub fn readout_error(ground_given_ground: f64, excited_given_excited: f64) -> f64 {
    1.0 - 0.5 * (ground_given_ground + excited_given_excited)
}
