//! Synthetic experiments: true population vectors for the reference
//! circuits and shot sampling through detector models.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::detector::{
    BimodalResponse, CalibrationDataset, GaussianComponent, IQShot, ProjectionSpec,
    QubitResponseModel,
};
use crate::error::{Error, Result};
use crate::multiqubit::BasisIndex;
use crate::shots::Shots;

const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Exact populations of the computational basis states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueState {
    populations: Vec<f64>,
}

impl TrueState {
    pub fn new(populations: Vec<f64>) -> Result<Self> {
        let k = populations.len();
        if k < 2 || !k.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "population vector length {k} is not 2^N with N ≥ 1"
            )));
        }
        if populations.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidInput("populations must be finite and non-negative".into()));
        }
        let sum: f64 = populations.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidInput(format!("populations sum to {sum}, not 1")));
        }
        Ok(Self { populations })
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    pub fn n_qubits(&self) -> usize {
        self.populations.len().trailing_zeros() as usize
    }

    pub fn n_states(&self) -> usize {
        self.populations.len()
    }
}

/// `(cos²(θ/2), sin²(θ/2))`, the populations after `R_y(θ)` on `|0⟩`.
pub fn ry_populations(theta: f64) -> TrueState {
    let c = (theta / 2.0).cos().powi(2);
    TrueState {
        populations: vec![c, 1.0 - c],
    }
}

/// `|Φ+⟩ = (|00⟩ + |11⟩)/√2`.
pub fn bell_populations() -> TrueState {
    TrueState {
        populations: vec![0.5, 0.0, 0.0, 0.5],
    }
}

/// All population on one bitstring, qubit 1 leftmost.
pub fn bitstring_populations(bits: &str) -> Result<TrueState> {
    let index = BasisIndex::from_bitstring(bits)?;
    let mut populations = vec![0.0; 1 << bits.len()];
    populations[index.0] = 1.0;
    Ok(TrueState { populations })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub depolarizing_strength: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(depolarizing_strength: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            depolarizing_strength,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.depolarizing_strength) {
            return Err(Error::InvalidInput(format!(
                "depolarizing strength {} outside [0, 1]",
                self.depolarizing_strength
            )));
        }
        Ok(())
    }
}

/// `(1 − λ)·ρ + λ/2^N`.
pub fn apply_depolarizing(state: &TrueState, cfg: &NoiseConfig) -> Result<TrueState> {
    cfg.validate()?;
    let lambda = cfg.depolarizing_strength;
    let uniform = 1.0 / state.n_states() as f64;
    let mixed: Vec<f64> = state
        .populations
        .iter()
        .map(|p| (1.0 - lambda) * p + lambda * uniform)
        .collect();
    let sum: f64 = mixed.iter().sum();
    Ok(TrueState {
        populations: mixed.into_iter().map(|p| p / sum).collect(),
    })
}

fn check_sampling(state: &TrueState, models: &[QubitResponseModel], n_shots: usize) -> Result<()> {
    if n_shots == 0 {
        return Err(Error::InvalidInput("n_shots must be at least 1".into()));
    }
    if models.len() != state.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: state.n_qubits(),
            got: models.len(),
        });
    }
    Ok(())
}

/// Draws `n_shots` projected shots: a basis state from the populations,
/// then one detector value per qubit from that qubit's response to its bit.
pub fn sample_shots(
    state: &TrueState,
    models: &[QubitResponseModel],
    n_shots: usize,
    seed: u64,
) -> Result<Shots> {
    check_sampling(state, models, n_shots)?;
    let n = models.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let categorical = WeightedIndex::new(&state.populations)
        .map_err(|e| Error::InvalidInput(format!("populations: {e}")))?;
    let mut shots = Shots::new(n);
    let mut row = vec![0.0; n];
    for _ in 0..n_shots {
        let s = BasisIndex(categorical.sample(&mut rng));
        for (k, m) in models.iter().enumerate() {
            row[k] = m.response(s.bit(k, n)).sample(&mut rng);
        }
        shots.push(&row)?;
    }
    Ok(shots)
}

/// Like [`sample_shots`], additionally lifting every projected value to the
/// IQ plane through the model's projection with Gaussian transverse noise of
/// standard deviation `transverse_std`. Rows of the returned IQ list follow
/// the shot order, one entry per qubit.
pub fn sample_iq_shots(
    state: &TrueState,
    models: &[QubitResponseModel],
    n_shots: usize,
    seed: u64,
    transverse_std: f64,
) -> Result<(Shots, Vec<Vec<IQShot>>)> {
    if !(transverse_std >= 0.0) {
        return Err(Error::InvalidInput("transverse_std must be non-negative".into()));
    }
    let shots = sample_shots(state, models, n_shots, seed)?;
    // Independent stream for the transverse axis so the projected values
    // match `sample_shots` with the same seed.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a5e_0f1d_d00d_0001);
    let iq = shots
        .rows()
        .map(|row| {
            row.iter()
                .zip(models)
                .map(|(&x, m)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m.projection.lift(x, transverse_std * z)
                })
                .collect()
        })
        .collect();
    Ok((shots, iq))
}

/// Calibration record for one qubit: `n_per_state` IQ shots after ground
/// preparation and as many after excited preparation.
pub fn simulate_calibration(
    model: &QubitResponseModel,
    n_per_state: usize,
    seed: u64,
    transverse_std: f64,
) -> Result<CalibrationDataset> {
    let one = std::slice::from_ref(model);
    let (_, ground) = sample_iq_shots(&bitstring_populations("0")?, one, n_per_state, seed, transverse_std)?;
    let (_, excited) = sample_iq_shots(
        &bitstring_populations("1")?,
        one,
        n_per_state,
        seed.wrapping_add(1),
        transverse_std,
    )?;
    Ok(CalibrationDataset {
        qubit_id: model.qubit_id.clone(),
        ground_shots: ground.into_iter().map(|r| r[0]).collect(),
        excited_shots: excited.into_iter().map(|r| r[0]).collect(),
    })
}

/// Built-in synthetic detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorPreset {
    /// Single-qubit detector with roughly 5% threshold misassignment.
    QuitoLike,
    /// Register detector with roughly 2% misassignment per qubit.
    Register,
}

impl DetectorPreset {
    pub const ALL: [DetectorPreset; 2] = [DetectorPreset::QuitoLike, DetectorPreset::Register];

    pub fn name(self) -> &'static str {
        match self {
            DetectorPreset::QuitoLike => "quito-like",
            DetectorPreset::Register => "register",
        }
    }

    /// Main-peak separation, common width and leak weights `(ground, excited)`.
    fn parameters(self) -> (f64, f64, f64, f64) {
        match self {
            DetectorPreset::QuitoLike => (4.0, 1.0, 0.02, 0.04),
            DetectorPreset::Register => (4.4, 1.0, 0.005, 0.01),
        }
    }

    /// Response model for qubit `index`. The IQ geometry differs per qubit;
    /// the projected response is the same for all of them.
    pub fn model(self, index: usize) -> QubitResponseModel {
        let (sep, std, leak_g, leak_e) = self.parameters();
        let g = GaussianComponent { mean: 0.0, std };
        let e = GaussianComponent { mean: sep, std };
        let projection = ProjectionSpec::new(0.35 + 0.9 * index as f64, -1.5 + 0.5 * index as f64);
        QubitResponseModel {
            qubit_id: format!("q{index}"),
            projection,
            p_g: BimodalResponse {
                main: g,
                leak: e,
                leak_weight: leak_g,
            },
            p_e: BimodalResponse {
                main: e,
                leak: g,
                leak_weight: leak_e,
            },
        }
    }

    pub fn models(self, n_qubits: usize) -> Vec<QubitResponseModel> {
        (0..n_qubits).map(|k| self.model(k)).collect()
    }

    /// Transverse IQ noise matching the main-peak width.
    pub fn transverse_std(self) -> f64 {
        self.parameters().1
    }
}

impl fmt::Display for DetectorPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorPreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown detector preset `{s}`")))
    }
}

/// `θ_k = 2πk/n` for `k = 0..n`, spanning `[0, 2π)`.
pub fn theta_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::calibrate_qubit;

    fn narrow_model() -> QubitResponseModel {
        QubitResponseModel::new(
            "n",
            ProjectionSpec::IDENTITY,
            BimodalResponse::unimodal(GaussianComponent::new(0.0, 0.1).unwrap()),
            BimodalResponse::unimodal(GaussianComponent::new(10.0, 0.1).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn ry_examples() {
        let approx = |s: TrueState, e: [f64; 2]| {
            assert!((s.populations()[0] - e[0]).abs() < 1e-15);
            assert!((s.populations()[1] - e[1]).abs() < 1e-15);
        };
        approx(ry_populations(0.0), [1.0, 0.0]);
        approx(ry_populations(PI), [0.0, 1.0]);
        approx(ry_populations(PI / 2.0), [0.5, 0.5]);
    }

    #[test]
    fn bell_and_bitstring() {
        let b = bell_populations();
        assert_eq!(b.populations(), &[0.5, 0.0, 0.0, 0.5]);
        assert_eq!(b.populations().iter().sum::<f64>(), 1.0);
        assert_eq!(b.n_qubits(), 2);

        let s = bitstring_populations("0110").unwrap();
        assert_eq!(s.populations()[6], 1.0);
        assert_eq!(s.populations().iter().sum::<f64>(), 1.0);
        assert_eq!(bitstring_populations("0").unwrap().populations(), &[1.0, 0.0]);
        assert!(bitstring_populations("").is_err());
    }

    #[test]
    fn true_state_validation() {
        assert!(TrueState::new(vec![0.5, 0.5 + 1e-11]).is_err());
        assert!(TrueState::new(vec![0.5, 0.25, 0.25]).is_err());
        assert!(TrueState::new(vec![1.2, -0.2]).is_err());
        assert!(TrueState::new(vec![0.5, 0.5 + 1e-13]).is_ok());
    }

    #[test]
    fn depolarizing_examples() {
        let s = bitstring_populations("00").unwrap();
        let same = apply_depolarizing(&s, &NoiseConfig::new(0.0, 0).unwrap()).unwrap();
        assert_eq!(same, s);
        let full = apply_depolarizing(&s, &NoiseConfig::new(1.0, 0).unwrap()).unwrap();
        assert!(full.populations().iter().all(|p| (p - 0.25).abs() < 1e-15));
        let d = apply_depolarizing(&s, &NoiseConfig::new(0.2, 0).unwrap()).unwrap();
        for (p, e) in d.populations().iter().zip([0.85, 0.05, 0.05, 0.05]) {
            assert!((p - e).abs() < 1e-15);
        }
        assert!(NoiseConfig::new(1.5, 0).is_err());
    }

    #[test]
    fn sample_mean_within_standard_error() {
        let m = narrow_model();
        let shots = sample_shots(&bitstring_populations("0").unwrap(), &[m], 10_000, 1).unwrap();
        let mean = shots.column(0).iter().sum::<f64>() / 1e4;
        // 3 standard errors of 0.1/√10^4
        assert!(mean.abs() < 0.004, "{mean}");
    }

    #[test]
    fn same_seed_same_shots() {
        let m = DetectorPreset::QuitoLike.model(0);
        let s = ry_populations(1.0);
        let a = sample_shots(&s, std::slice::from_ref(&m), 500, 9).unwrap();
        let b = sample_shots(&s, std::slice::from_ref(&m), 500, 9).unwrap();
        let c = sample_shots(&s, std::slice::from_ref(&m), 500, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let (ia, iqa) = sample_iq_shots(&s, std::slice::from_ref(&m), 50, 9, 1.0).unwrap();
        let (_, iqb) = sample_iq_shots(&s, std::slice::from_ref(&m), 50, 9, 1.0).unwrap();
        assert_eq!(iqa, iqb);
        assert_eq!(ia, a.truncated(50));
    }

    #[test]
    fn balanced_state_fraction_binomial() {
        let m = narrow_model();
        let n = 10_000;
        let shots = sample_shots(&ry_populations(PI / 2.0), &[m], n, 4).unwrap();
        let ground = shots.column(0).iter().filter(|x| **x < 5.0).count() as f64 / n as f64;
        let sigma = (0.25 / n as f64).sqrt();
        assert!((ground - 0.5).abs() < 3.0 * sigma, "{ground}");
    }

    #[test]
    fn categorical_frequencies_unbiased() {
        let m = narrow_model();
        let state = TrueState::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let n = 100_000;
        let shots = sample_shots(&state, &[m.clone(), m], n, 12).unwrap();
        let mut freq = [0usize; 4];
        for row in shots.rows() {
            let s = usize::from(row[0] > 5.0) * 2 + usize::from(row[1] > 5.0);
            freq[s] += 1;
        }
        for (f, p) in freq.iter().zip(state.populations()) {
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*f as f64 / n as f64 - p).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn lifted_shots_project_back() {
        let m = DetectorPreset::Register.model(2);
        let (shots, iq) =
            sample_iq_shots(&ry_populations(1.0), std::slice::from_ref(&m), 100, 3, 1.0).unwrap();
        for (row, iq_row) in shots.rows().zip(&iq) {
            assert!((m.projection.project(iq_row[0]) - row[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn calibration_recovers_preset() {
        let truth = DetectorPreset::QuitoLike.model(0);
        let data = simulate_calibration(&truth, 100_000, 5, 1.0).unwrap();
        assert_eq!(data.ground_shots.len(), 100_000);
        let fit = calibrate_qubit(&data).unwrap();
        let sep = fit.p_e.main.mean - fit.p_g.main.mean;
        assert!((sep - 4.0).abs() < 0.02, "{sep}");
        assert!((fit.p_g.leak_weight - 0.02).abs() < 0.003);
        assert!((fit.p_e.leak_weight - 0.04).abs() < 0.003);
        assert!((fit.projection.angle - truth.projection.angle).abs() < 0.01);
    }

    #[test]
    fn preset_names_roundtrip() {
        for p in DetectorPreset::ALL {
            assert_eq!(p.name().parse::<DetectorPreset>().unwrap(), p);
        }
        assert!("nope".parse::<DetectorPreset>().is_err());
    }

    #[test]
    fn theta_grid_is_half_open() {
        let g = theta_grid(41);
        assert_eq!(g.len(), 41);
        assert_eq!(g[0], 0.0);
        assert!(*g.last().unwrap() < 2.0 * PI);
    }
}
