//! Command-line front end: `calibrate`, `estimate` and `benchmark`.
//!
//! Settings come from three layers. Flags win over values in the JSON file
//! given with `--config`, which win over built-in defaults. The resolved
//! configuration is hashed and the hash is written into every output file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::baselines::fit_separatrix;
use crate::detector::calibrate_qubit;
use crate::error::{Error, Result};
use crate::estimators::{count_std_devs, BaleroMethod, Convergence, EstimatorSettings, Readout};
use crate::io::{
    config_hash, population_map, read_calibration, read_calibration_shots, read_json, read_shots,
    timestamp, write_counts_json, write_json, write_metrics_csv, write_posterior_csv,
    CalibrationMeta, CalibrationStore, HashedCsv, PopulationEntry, SCHEMA_VERSION,
};
use crate::metrics::Estimator;
use crate::scenario::{run_benchmark, BenchmarkSpec, Scenario};
use crate::simulator::DetectorPreset;

/// Exit code when the pairwise heuristic stopped at `max_sweeps`.
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "balero", version, about = "Bayesian readout calibration and population estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit detector response models from prepared-state calibration shots.
    Calibrate(ConfigLayer),
    /// Estimate populations from measurement shots.
    Estimate(ConfigLayer),
    /// Run a synthetic benchmark scenario.
    Benchmark(ConfigLayer),
}

/// One layer of settings. Every field is optional so that flags and the
/// config file can be merged field by field.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    /// JSON file with default values for any of these settings.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Calibration store (JSON). Written by `calibrate`, read by `estimate`.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Shot CSV. Calibration shots for `calibrate`, measurement shots for `estimate`.
    #[arg(long)]
    pub shots: Option<PathBuf>,
    /// balero, counts, inversion or all.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Points of the single-qubit posterior grid.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Lattice divisions of the two-qubit simplex.
    #[arg(long)]
    pub joint_resolution: Option<usize>,
    /// Points of the pairwise heuristic's pair grid.
    #[arg(long)]
    pub pair_grid_points: Option<usize>,
    /// Pairwise convergence threshold.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<String>,
    /// Comma-separated shot counts.
    #[arg(long, value_delimiter = ',')]
    pub n_shots: Option<Vec<usize>>,
    #[arg(long)]
    pub n_seeds: Option<usize>,
    #[arg(long)]
    pub theta_points: Option<usize>,
    #[arg(long)]
    pub bitstring: Option<String>,
    /// Synthetic detector: quito-like or register.
    #[arg(long)]
    pub preset: Option<String>,
    /// Fixed depolarizing strength for bv-output.
    #[arg(long)]
    pub depolarizing: Option<f64>,
    /// Threshold-counts error that bv-output tunes its depolarizing strength to.
    #[arg(long)]
    pub target_counts_error: Option<f64>,
    /// Shots per prepared state when calibrating a synthetic device.
    #[arg(long)]
    pub calibration_shots: Option<usize>,
}

impl ConfigLayer {
    /// Field-wise `self` over `fallback`.
    fn or(self, fallback: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            config: self.config.or(fallback.config),
            calibration: self.calibration.or(fallback.calibration),
            shots: self.shots.or(fallback.shots),
            estimator: self.estimator.or(fallback.estimator),
            grid_points: self.grid_points.or(fallback.grid_points),
            joint_resolution: self.joint_resolution.or(fallback.joint_resolution),
            pair_grid_points: self.pair_grid_points.or(fallback.pair_grid_points),
            epsilon: self.epsilon.or(fallback.epsilon),
            max_sweeps: self.max_sweeps.or(fallback.max_sweeps),
            seed: self.seed.or(fallback.seed),
            out: self.out.or(fallback.out),
            scenario: self.scenario.or(fallback.scenario),
            n_shots: self.n_shots.or(fallback.n_shots),
            n_seeds: self.n_seeds.or(fallback.n_seeds),
            theta_points: self.theta_points.or(fallback.theta_points),
            bitstring: self.bitstring.or(fallback.bitstring),
            preset: self.preset.or(fallback.preset),
            depolarizing: self.depolarizing.or(fallback.depolarizing),
            target_counts_error: self.target_counts_error.or(fallback.target_counts_error),
            calibration_shots: self.calibration_shots.or(fallback.calibration_shots),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorSelection {
    Balero,
    Counts,
    Inversion,
    All,
}

impl EstimatorSelection {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "balero" => Ok(Self::Balero),
            "counts" => Ok(Self::Counts),
            "inversion" => Ok(Self::Inversion),
            "all" => Ok(Self::All),
            _ => Err(Error::InvalidInput(format!(
                "--estimator must be balero, counts, inversion or all, got `{s}`"
            ))),
        }
    }

    fn includes(self, e: Estimator) -> bool {
        match self {
            Self::All => true,
            Self::Balero => e == Estimator::Balero,
            Self::Counts => e == Estimator::Counts,
            Self::Inversion => e == Estimator::Inversion,
        }
    }
}

/// Fully resolved, validated settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub calibration: Option<PathBuf>,
    pub shots: Option<PathBuf>,
    pub estimator: EstimatorSelection,
    pub settings: EstimatorSettings,
    pub seed: u64,
    pub out: PathBuf,
    pub benchmark: Option<BenchmarkSpec>,
}

impl RunConfig {
    /// Merges flags over the config file (if any) over defaults.
    pub fn resolve(command: &'static str, flags: ConfigLayer) -> Result<Self> {
        let file = match &flags.config {
            Some(p) => read_json::<ConfigLayer>(p)?,
            None => ConfigLayer::default(),
        };
        let c = flags.or(file);
        let defaults = EstimatorSettings::default();
        let settings = EstimatorSettings {
            grid_points: c.grid_points.unwrap_or(defaults.grid_points),
            joint_resolution: c.joint_resolution.unwrap_or(defaults.joint_resolution),
            pair_grid_points: c.pair_grid_points.unwrap_or(defaults.pair_grid_points),
            epsilon: c.epsilon.unwrap_or(defaults.epsilon),
            max_sweeps: c.max_sweeps.unwrap_or(defaults.max_sweeps),
        };
        settings.validate()?;
        let seed = c.seed.unwrap_or(0);
        let benchmark = if command == "benchmark" {
            let name = c
                .scenario
                .as_deref()
                .ok_or_else(|| Error::InvalidInput("benchmark needs --scenario".into()))?;
            let scenario: Scenario = name.parse()?;
            let base = BenchmarkSpec::new(scenario);
            let spec = BenchmarkSpec {
                scenario,
                preset: match &c.preset {
                    Some(p) => p.parse::<DetectorPreset>()?,
                    None => base.preset,
                },
                n_shots: c.n_shots.clone().unwrap_or(base.n_shots),
                n_seeds: c.n_seeds.unwrap_or(base.n_seeds),
                seed,
                theta_points: c.theta_points.unwrap_or(base.theta_points),
                bitstring: c.bitstring.clone().unwrap_or(base.bitstring),
                depolarizing: c.depolarizing.or(base.depolarizing),
                target_counts_error: c.target_counts_error.unwrap_or(base.target_counts_error),
                calibration_shots: c.calibration_shots.unwrap_or(base.calibration_shots),
                settings,
            };
            spec.validate()?;
            Some(spec)
        } else {
            None
        };
        Ok(Self {
            command,
            calibration: c.calibration,
            shots: c.shots,
            estimator: EstimatorSelection::parse(c.estimator.as_deref().unwrap_or("all"))?,
            settings,
            seed,
            out: c.out.unwrap_or_else(|| PathBuf::from(".")),
            benchmark,
        })
    }

    pub fn hash(&self) -> Result<String> {
        config_hash(self)
    }

    fn require<'a>(&self, path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| Error::InvalidInput(format!("{} needs --{flag}", self.command)))
    }
}

fn create_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Fits every qubit in the calibration shot file and writes the store.
/// Returns the path written.
pub fn cmd_calibrate(cfg: &RunConfig) -> Result<PathBuf> {
    let shots_path = cfg.require(&cfg.shots, "shots")?;
    let hash = cfg.hash()?;
    let datasets = read_calibration_shots(shots_path)?;
    let mut store = CalibrationStore::default();
    let stamp = timestamp();
    for d in &datasets {
        let model = calibrate_qubit(d)?;
        let sep = fit_separatrix(&model)?;
        let (eg, ee) = sep.misassignment(&model);
        println!(
            "{id}: axis angle {a:.6} offset {o:.6}\n  P_g: main N({gm:.4}, {gs:.4}) leak N({glm:.4}, {gls:.4}) weight {gw:.5}\n  P_e: main N({em:.4}, {es:.4}) leak N({elm:.4}, {els:.4}) weight {ew:.5}\n  overlap {ov:.5}  threshold {t:.4}  misassignment g {eg:.5} e {ee:.5}",
            id = d.qubit_id,
            a = model.projection.angle,
            o = model.projection.offset,
            gm = model.p_g.main.mean,
            gs = model.p_g.main.std,
            glm = model.p_g.leak.mean,
            gls = model.p_g.leak.std,
            gw = model.p_g.leak_weight,
            em = model.p_e.main.mean,
            es = model.p_e.main.std,
            elm = model.p_e.leak.mean,
            els = model.p_e.leak.std,
            ew = model.p_e.leak_weight,
            ov = model.overlap(),
            t = sep.threshold,
        );
        store.insert(
            &model,
            CalibrationMeta {
                n_shots: d.n_shots(),
                timestamp: stamp.clone(),
                schema_version: SCHEMA_VERSION,
                config_hash: Some(hash.clone()),
            },
        );
    }
    let path = match &cfg.calibration {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
                create_out_dir(parent)?;
            }
            p.clone()
        }
        None => {
            create_out_dir(&cfg.out)?;
            cfg.out.join("calibration.json")
        }
    };
    write_json(&path, &store)?;
    println!("wrote {}", path.display());
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOutput {
    pub method: String,
    pub populations: BTreeMap<String, PopulationEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<Convergence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_number: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResults {
    pub config_hash: String,
    pub qubit_ids: Vec<String>,
    pub n_shots: usize,
    pub estimators: BTreeMap<String, EstimatorOutput>,
}

/// Runs the selected estimators and writes `results.json` (plus
/// `counts.json` and, for one qubit, `posterior.csv`). Returns the results
/// and whether the pairwise heuristic converged.
pub fn cmd_estimate(cfg: &RunConfig) -> Result<(EstimateResults, bool)> {
    let cal_path = cfg.require(&cfg.calibration, "calibration")?;
    let shots_path = cfg.require(&cfg.shots, "shots")?;
    let hash = cfg.hash()?;
    let store = read_calibration(cal_path)?;
    let file = read_shots(shots_path)?;
    let models = store.models(&file.qubit_ids)?;
    let shots = file.to_shots(&models)?;
    let n = models.len();
    let readout = Readout::new(models)?;
    create_out_dir(&cfg.out)?;

    let mut estimators = BTreeMap::new();
    let mut converged = true;
    if cfg.estimator.includes(Estimator::Balero) {
        let r = readout.balero(&shots, &cfg.settings)?;
        converged = !r.hit_max_sweeps();
        if let Some(post) = &r.posterior {
            write_posterior_csv(&cfg.out.join("posterior.csv"), &hash, post)?;
        }
        let method = match r.method {
            BaleroMethod::SingleQubit => "balero-single",
            BaleroMethod::ExactJoint => "balero-exact",
            BaleroMethod::Pairwise => "balero-pairwise",
        };
        estimators.insert(
            Estimator::Balero.label().to_string(),
            EstimatorOutput {
                method: method.into(),
                populations: population_map(n, &r.estimate.populations, &r.estimate.std_devs),
                convergence: r.convergence,
                condition_number: None,
            },
        );
    }
    if cfg.estimator.includes(Estimator::Counts) || cfg.estimator.includes(Estimator::Inversion) {
        let counts = readout.counts(&shots)?;
        if cfg.estimator.includes(Estimator::Counts) {
            write_counts_json(&cfg.out.join("counts.json"), &counts)?;
            estimators.insert(
                Estimator::Counts.label().to_string(),
                EstimatorOutput {
                    method: "separatrix-counts".into(),
                    populations: population_map(n, &counts.fractions(), &count_std_devs(&counts)),
                    convergence: None,
                    condition_number: None,
                },
            );
        }
        if cfg.estimator.includes(Estimator::Inversion) {
            let inv = readout.inversion(&counts)?;
            estimators.insert(
                Estimator::Inversion.label().to_string(),
                EstimatorOutput {
                    method: "confusion-inversion".into(),
                    populations: population_map(n, &inv.quasi_populations, &inv.std_devs),
                    convergence: None,
                    condition_number: Some(inv.condition_number),
                },
            );
        }
    }
    let results = EstimateResults {
        config_hash: hash,
        qubit_ids: file.qubit_ids,
        n_shots: shots.len(),
        estimators,
    };
    write_json(&cfg.out.join("results.json"), &results)?;
    Ok((results, converged))
}

/// Runs the benchmark scenario and writes `metrics.csv` and one CSV per
/// plot table. Returns the number of pairwise runs that hit `max_sweeps`.
pub fn cmd_benchmark(cfg: &RunConfig) -> Result<usize> {
    let spec = cfg
        .benchmark
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("benchmark needs --scenario".into()))?;
    let hash = cfg.hash()?;
    let out = run_benchmark(spec)?;
    create_out_dir(&cfg.out)?;
    write_metrics_csv(&cfg.out.join("metrics.csv"), &hash, &out.metrics)?;
    for table in &out.plots {
        let header: Vec<&str> = table.header.iter().map(String::as_str).collect();
        let mut w = HashedCsv::create(&cfg.out.join(format!("{}.csv", table.name)), &hash, &header)?;
        for row in &table.rows {
            w.row(row)?;
        }
        w.finish()?;
    }
    if let Some(l) = out.depolarizing {
        println!("depolarizing strength {l:.6}");
    }
    let metric = out.metrics.first().map(|m| m.metric.clone()).unwrap_or_default();
    println!("{} ({}), mean {metric} over {} seeds:", spec.scenario, spec.preset, spec.n_seeds);
    for &n in &spec.n_shots {
        let cells: Vec<String> = Estimator::ALL
            .into_iter()
            .filter_map(|e| {
                let v = out.values(&metric, e, n);
                (!v.is_empty()).then(|| format!("{e} {:.5}", v.iter().sum::<f64>() / v.len() as f64))
            })
            .collect();
        println!("  n_shots {n:>7}: {}", cells.join("  "));
    }
    println!("wrote {}", cfg.out.display());
    Ok(out.unconverged)
}

/// Parses arguments, dispatches, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Calibrate(layer) => {
            RunConfig::resolve("calibrate", layer).and_then(|c| cmd_calibrate(&c).map(|_| 0))
        }
        Command::Estimate(layer) => RunConfig::resolve("estimate", layer).and_then(|c| {
            cmd_estimate(&c).map(|(_, converged)| if converged { 0 } else { EXIT_NOT_CONVERGED })
        }),
        Command::Benchmark(layer) => RunConfig::resolve("benchmark", layer).and_then(|c| {
            cmd_benchmark(&c).map(|unconverged| if unconverged == 0 { 0 } else { EXIT_NOT_CONVERGED })
        }),
    };
    match result {
        Ok(code) => {
            if code == EXIT_NOT_CONVERGED {
                eprintln!("warning: pairwise estimation stopped at max_sweeps; results were written");
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
