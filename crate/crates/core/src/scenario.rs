//! Benchmark scenarios on synthetic devices.
//!
//! A [`SyntheticDevice`] holds the true detector of a preset together with
//! the readout calibrated from simulated prepared-state shots, so every
//! estimator works from fitted models exactly as it would on hardware.
//! Each scenario sweeps shot counts and seeds and reports metric rows plus
//! plot tables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::ConfusionMatrix;
use crate::detector::{calibrate_qubit, QubitResponseModel};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorSettings, Readout};
use crate::metrics::{avg_ground_population_error, readout_error, total_population_error, Estimator, MetricReport};
use crate::multiqubit::BasisIndex;
use crate::shots::Shots;
use crate::simulator::{
    apply_depolarizing, bell_populations, bitstring_populations, ry_populations, sample_iq_shots,
    simulate_calibration, theta_grid, DetectorPreset, NoiseConfig, TrueState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    ReadoutFidelity,
    RySweep,
    Bell,
    BitstringPrep,
    BvOutput,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::ReadoutFidelity,
        Scenario::RySweep,
        Scenario::Bell,
        Scenario::BitstringPrep,
        Scenario::BvOutput,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::ReadoutFidelity => "readout-fidelity",
            Scenario::RySweep => "ry-sweep",
            Scenario::Bell => "bell",
            Scenario::BitstringPrep => "bitstring-prep",
            Scenario::BvOutput => "bv-output",
        }
    }

    pub fn default_preset(self) -> DetectorPreset {
        match self {
            Scenario::ReadoutFidelity | Scenario::RySweep | Scenario::Bell => {
                DetectorPreset::QuitoLike
            }
            Scenario::BitstringPrep | Scenario::BvOutput => DetectorPreset::Register,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// Everything a benchmark run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub scenario: Scenario,
    pub preset: DetectorPreset,
    pub n_shots: Vec<usize>,
    pub n_seeds: usize,
    pub seed: u64,
    pub theta_points: usize,
    pub bitstring: String,
    /// Fixed depolarizing strength for `bv-output`; solved from
    /// `target_counts_error` when absent.
    pub depolarizing: Option<f64>,
    pub target_counts_error: f64,
    pub calibration_shots: usize,
    pub settings: EstimatorSettings,
}

impl BenchmarkSpec {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            preset: scenario.default_preset(),
            n_shots: vec![100, 1_000, 10_000],
            n_seeds: 20,
            seed: 0,
            theta_points: 41,
            bitstring: "0110".into(),
            depolarizing: None,
            target_counts_error: 0.20,
            calibration_shots: 100_000,
            settings: EstimatorSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.settings.validate()?;
        if self.n_shots.is_empty() || self.n_shots.contains(&0) {
            return Err(Error::InvalidInput("n_shots must be a non-empty list of positive counts".into()));
        }
        if self.n_seeds == 0 {
            return Err(Error::InvalidInput("n_seeds must be at least 1".into()));
        }
        if self.theta_points < 2 {
            return Err(Error::InvalidInput("theta_points must be at least 2".into()));
        }
        if self.calibration_shots < crate::mixture::MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                needed: crate::mixture::MIN_SAMPLES,
                got: self.calibration_shots,
            });
        }
        if let Some(l) = self.depolarizing {
            NoiseConfig::new(l, self.seed)?;
        }
        if matches!(self.scenario, Scenario::BitstringPrep | Scenario::BvOutput) {
            BasisIndex::from_bitstring(&self.bitstring)?;
        }
        Ok(())
    }

    fn n_qubits(&self) -> usize {
        match self.scenario {
            Scenario::ReadoutFidelity | Scenario::RySweep => 1,
            Scenario::Bell => 2,
            Scenario::BitstringPrep | Scenario::BvOutput => self.bitstring.len(),
        }
    }
}

/// Independent sub-seed for stream `stream` of run seed `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x632b_e59b_d9b4_e019);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A simulated register: true detector plus the readout calibrated from it.
#[derive(Debug, Clone)]
pub struct SyntheticDevice {
    pub truth: Vec<QubitResponseModel>,
    pub readout: Readout,
    transverse_std: f64,
}

impl SyntheticDevice {
    /// Simulates `calibration_shots` shots per prepared state and qubit,
    /// then calibrates each qubit from them.
    pub fn calibrate(
        preset: DetectorPreset,
        n_qubits: usize,
        calibration_shots: usize,
        seed: u64,
    ) -> Result<Self> {
        let truth = preset.models(n_qubits);
        let transverse_std = preset.transverse_std();
        let models = truth
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let data = simulate_calibration(
                    m,
                    calibration_shots,
                    derive_seed(seed, 1_000 + k as u64),
                    transverse_std,
                )?;
                calibrate_qubit(&data)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            truth,
            readout: Readout::new(models)?,
            transverse_std,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.truth.len()
    }

    /// Shots from the true detector, projected with the calibrated axes.
    pub fn measure(&self, state: &TrueState, n_shots: usize, seed: u64) -> Result<Shots> {
        let (_, iq) = sample_iq_shots(state, &self.truth, n_shots, seed, self.transverse_std)?;
        let mut shots = Shots::new(self.n_qubits());
        let mut row = vec![0.0; self.n_qubits()];
        for iq_row in &iq {
            for ((x, s), m) in row.iter_mut().zip(iq_row).zip(&self.readout.models) {
                *x = m.projection.project(*s);
            }
            shots.push(&row)?;
        }
        Ok(shots)
    }

    /// Assignment probabilities the threshold baseline actually realizes:
    /// true detector densities integrated against the calibrated thresholds.
    pub fn true_confusion(&self) -> Result<ConfusionMatrix> {
        let seps: Vec<_> = self
            .truth
            .iter()
            .zip(&self.readout.models)
            .zip(&self.readout.separatrices)
            .map(|((t, c), s)| {
                // calibrated axis differs from the preset axis by a shift
                let shift = c.p_g.main.mean - t.p_g.main.mean;
                crate::baselines::Separatrix {
                    threshold: s.threshold - shift,
                    ground_below: s.ground_below,
                }
            })
            .collect();
        ConfusionMatrix::from_models(&self.truth, &seps)
    }

    /// Expected threshold readout error of qubit 1.
    pub fn analytic_counts_readout_error(&self) -> Result<f64> {
        let c = self.true_confusion()?;
        let n = c.entries().nrows();
        // marginal of qubit 1 given prepared all-ground / all-excited
        let half = n / 2;
        let p00: f64 = (0..half).map(|a| c.entries()[(a, 0)]).sum();
        let p11: f64 = (half..n).map(|a| c.entries()[(a, n - 1)]).sum();
        Ok(readout_error(p00, p11))
    }
}

/// Depolarizing strength at which the expected threshold counts sit an L1
/// distance `target` from `ideal`.
pub fn depolarizing_for_counts_error(
    target: f64,
    ideal: &TrueState,
    confusion: &ConfusionMatrix,
) -> Result<f64> {
    let err = |lambda: f64| -> Result<f64> {
        let noisy = apply_depolarizing(ideal, &NoiseConfig::new(lambda, 0)?)?;
        total_population_error(ideal.populations(), &confusion.apply(noisy.populations())?)
    };
    let (lo_err, hi_err) = (err(0.0)?, err(1.0)?);
    if !(lo_err..=hi_err).contains(&target) {
        return Err(Error::InvalidInput(format!(
            "counts error {target} not reachable: readout alone gives {lo_err:.4}, full mixing {hi_err:.4}"
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if err(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Column-labelled table of plot data.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutput {
    pub metrics: Vec<MetricReport>,
    pub plots: Vec<PlotTable>,
    /// Runs where the pairwise heuristic stopped at `max_sweeps`.
    pub unconverged: usize,
    /// Depolarizing strength used by `bv-output`.
    pub depolarizing: Option<f64>,
}

impl BenchmarkOutput {
    /// Metric values for one estimator and shot count, ordered by seed.
    pub fn values(&self, metric: &str, estimator: Estimator, n_shots: usize) -> Vec<f64> {
        self.metrics
            .iter()
            .filter(|r| r.metric == metric && r.estimator == estimator && r.n_shots == n_shots)
            .map(|r| r.value)
            .collect()
    }
}

struct Populations {
    balero: Vec<f64>,
    counts: Vec<f64>,
    inversion: Option<Vec<f64>>,
    unconverged: bool,
}

fn estimate_all(readout: &Readout, shots: &Shots, settings: &EstimatorSettings) -> Result<Populations> {
    let balero = readout.balero(shots, settings)?;
    let counts = readout.counts(shots)?;
    let inversion = match readout.inversion(&counts) {
        Ok(r) => Some(r.quasi_populations),
        Err(Error::SingularMatrix { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(Populations {
        unconverged: balero.hit_max_sweeps(),
        balero: balero.estimate.populations,
        counts: counts.fractions(),
        inversion,
    })
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

/// Runs a scenario end to end on a freshly calibrated synthetic device.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkOutput> {
    spec.validate()?;
    let device = SyntheticDevice::calibrate(
        spec.preset,
        spec.n_qubits(),
        spec.calibration_shots,
        derive_seed(spec.seed, 0xCA1),
    )?;
    run_on_device(spec, &device)
}

/// Runs a scenario on an already calibrated device.
pub fn run_on_device(spec: &BenchmarkSpec, device: &SyntheticDevice) -> Result<BenchmarkOutput> {
    spec.validate()?;
    if device.n_qubits() != spec.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: spec.n_qubits(),
            got: device.n_qubits(),
        });
    }
    match spec.scenario {
        Scenario::ReadoutFidelity => readout_fidelity(spec, device),
        Scenario::RySweep => ry_sweep(spec, device),
        Scenario::Bell => {
            let s = bell_populations();
            state_benchmark(spec, device, &s, &s, None)
        }
        Scenario::BitstringPrep => {
            let s = bitstring_populations(&spec.bitstring)?;
            state_benchmark(spec, device, &s, &s, None)
        }
        Scenario::BvOutput => {
            let ideal = bitstring_populations(&spec.bitstring)?;
            let lambda = match spec.depolarizing {
                Some(l) => l,
                None => depolarizing_for_counts_error(
                    spec.target_counts_error,
                    &ideal,
                    &device.true_confusion()?,
                )?,
            };
            let noisy = apply_depolarizing(&ideal, &NoiseConfig::new(lambda, spec.seed)?)?;
            state_benchmark(spec, device, &noisy, &ideal, Some(lambda))
        }
    }
}

fn max_shots(spec: &BenchmarkSpec) -> usize {
    spec.n_shots.iter().copied().max().unwrap_or(0)
}

fn readout_fidelity(spec: &BenchmarkSpec, device: &SyntheticDevice) -> Result<BenchmarkOutput> {
    let ground = bitstring_populations("0")?;
    let excited = bitstring_populations("1")?;
    let analytic = device.analytic_counts_readout_error()?;
    let mut metrics = Vec::new();
    let mut rows = Vec::new();
    for s in 0..spec.n_seeds as u64 {
        let seed = derive_seed(spec.seed, s);
        let all_g = device.measure(&ground, max_shots(spec), derive_seed(seed, 0))?;
        let all_e = device.measure(&excited, max_shots(spec), derive_seed(seed, 1))?;
        for &n in &spec.n_shots {
            let g = estimate_all(&device.readout, &all_g.truncated(n), &spec.settings)?;
            let e = estimate_all(&device.readout, &all_e.truncated(n), &spec.settings)?;
            let mut values = vec![
                (Estimator::Balero, readout_error(g.balero[0], e.balero[1])),
                (Estimator::Counts, readout_error(g.counts[0], e.counts[1])),
            ];
            if let (Some(gi), Some(ei)) = (&g.inversion, &e.inversion) {
                values.push((Estimator::Inversion, readout_error(gi[0], ei[1])));
            }
            let mut row = vec![n.to_string(), s.to_string()];
            for (est, v) in &values {
                metrics.push(MetricReport {
                    metric: "readout_error".into(),
                    estimator: *est,
                    n_shots: n,
                    seed: s,
                    value: *v,
                });
                row.push(fmt_f(*v));
            }
            if values.len() < 3 {
                row.push(String::new());
            }
            row.push(fmt_f(analytic));
            rows.push(row);
        }
    }
    Ok(BenchmarkOutput {
        metrics,
        plots: vec![PlotTable {
            name: "readout_fidelity".into(),
            header: ["n_shots", "seed", "balero", "counts", "inversion", "counts_analytic"]
                .map(String::from)
                .to_vec(),
            rows,
        }],
        unconverged: 0,
        depolarizing: None,
    })
}

fn ry_sweep(spec: &BenchmarkSpec, device: &SyntheticDevice) -> Result<BenchmarkOutput> {
    let thetas = theta_grid(spec.theta_points);
    let n_theta = thetas.len();
    let mut metrics = Vec::new();
    // per shot count: running sums over seeds of ρ_g(θ) per estimator
    let mut sums = vec![[vec![0.0; n_theta], vec![0.0; n_theta], vec![0.0; n_theta]]; spec.n_shots.len()];
    let mut inversion_ok = vec![true; spec.n_shots.len()];
    for s in 0..spec.n_seeds as u64 {
        let seed = derive_seed(spec.seed, s);
        let mut per_n = vec![[vec![0.0; n_theta], vec![0.0; n_theta], vec![0.0; n_theta]]; spec.n_shots.len()];
        for (k, &theta) in thetas.iter().enumerate() {
            let all = device.measure(&ry_populations(theta), max_shots(spec), derive_seed(seed, k as u64))?;
            for (j, &n) in spec.n_shots.iter().enumerate() {
                let p = estimate_all(&device.readout, &all.truncated(n), &spec.settings)?;
                per_n[j][0][k] = p.balero[0];
                per_n[j][1][k] = p.counts[0];
                match p.inversion {
                    Some(v) => per_n[j][2][k] = v[0],
                    None => inversion_ok[j] = false,
                }
            }
        }
        for (j, &n) in spec.n_shots.iter().enumerate() {
            for (e, est) in Estimator::ALL.into_iter().enumerate() {
                if est == Estimator::Inversion && !inversion_ok[j] {
                    continue;
                }
                metrics.push(MetricReport {
                    metric: "avg_ground_population_error".into(),
                    estimator: est,
                    n_shots: n,
                    seed: s,
                    value: avg_ground_population_error(&thetas, &per_n[j][e])?,
                });
                for k in 0..n_theta {
                    sums[j][e][k] += per_n[j][e][k];
                }
            }
        }
    }
    let seeds = spec.n_seeds as f64;
    let plots = spec
        .n_shots
        .iter()
        .enumerate()
        .map(|(j, &n)| PlotTable {
            name: format!("ry_sweep_n{n}"),
            header: ["theta", "ideal", "counts", "balero", "inversion"]
                .map(String::from)
                .to_vec(),
            rows: (0..n_theta)
                .map(|k| {
                    let inv = if inversion_ok[j] {
                        fmt_f(sums[j][2][k] / seeds)
                    } else {
                        String::new()
                    };
                    vec![
                        fmt_f(thetas[k]),
                        fmt_f(ry_populations(thetas[k]).populations()[0]),
                        fmt_f(sums[j][1][k] / seeds),
                        fmt_f(sums[j][0][k] / seeds),
                        inv,
                    ]
                })
                .collect(),
        })
        .collect();
    Ok(BenchmarkOutput {
        metrics,
        plots,
        unconverged: 0,
        depolarizing: None,
    })
}

fn state_benchmark(
    spec: &BenchmarkSpec,
    device: &SyntheticDevice,
    truth: &TrueState,
    ideal: &TrueState,
    depolarizing: Option<f64>,
) -> Result<BenchmarkOutput> {
    let n_qubits = device.n_qubits();
    let k = truth.n_states();
    let compare_ideal = truth != ideal;
    let mut metrics = Vec::new();
    let mut unconverged = 0;
    let mut sums = vec![[vec![0.0; k], vec![0.0; k], vec![0.0; k]]; spec.n_shots.len()];
    let mut inversion_seeds = vec![0usize; spec.n_shots.len()];
    for s in 0..spec.n_seeds as u64 {
        let seed = derive_seed(spec.seed, s);
        let all = device.measure(truth, max_shots(spec), seed)?;
        for (j, &n) in spec.n_shots.iter().enumerate() {
            let p = estimate_all(&device.readout, &all.truncated(n), &spec.settings)?;
            unconverged += usize::from(p.unconverged);
            let mut vectors = vec![(Estimator::Balero, &p.balero), (Estimator::Counts, &p.counts)];
            if let Some(v) = &p.inversion {
                vectors.push((Estimator::Inversion, v));
                inversion_seeds[j] += 1;
            }
            for (est, v) in vectors {
                let e = est as usize;
                for (acc, x) in sums[j][e].iter_mut().zip(v.iter()) {
                    *acc += x;
                }
                metrics.push(MetricReport {
                    metric: "total_population_error".into(),
                    estimator: est,
                    n_shots: n,
                    seed: s,
                    value: total_population_error(truth.populations(), v)?,
                });
                if compare_ideal {
                    metrics.push(MetricReport {
                        metric: "total_population_error_ideal".into(),
                        estimator: est,
                        n_shots: n,
                        seed: s,
                        value: total_population_error(ideal.populations(), v)?,
                    });
                }
            }
        }
    }
    let seeds = spec.n_seeds as f64;
    let mut header: Vec<String> = ["bitstring", "exact"].map(String::from).to_vec();
    if compare_ideal {
        header.push("ideal".into());
    }
    header.extend(["counts", "balero", "inversion"].map(String::from));
    let plots = spec
        .n_shots
        .iter()
        .enumerate()
        .map(|(j, &n)| PlotTable {
            name: format!("{}_n{n}", spec.scenario.name().replace('-', "_")),
            header: header.clone(),
            rows: (0..k)
                .map(|b| {
                    let mut row = vec![
                        BasisIndex(b).bitstring(n_qubits),
                        fmt_f(truth.populations()[b]),
                    ];
                    if compare_ideal {
                        row.push(fmt_f(ideal.populations()[b]));
                    }
                    row.push(fmt_f(sums[j][1][b] / seeds));
                    row.push(fmt_f(sums[j][0][b] / seeds));
                    row.push(if inversion_seeds[j] > 0 {
                        fmt_f(sums[j][2][b] / inversion_seeds[j] as f64)
                    } else {
                        String::new()
                    });
                    row
                })
                .collect(),
        })
        .collect();
    Ok(BenchmarkOutput {
        metrics,
        plots,
        unconverged,
        depolarizing,
    })
}
