//! Acceptance gate. Each test prints one `PASS` or `FAIL` line for its
//! criterion before asserting, so the outcome of every criterion is visible
//! in the test log even when an earlier one fails.
//!
//! Tests take a shared lock and run one at a time, which keeps the
//! wall-clock budgets meaningful.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use balero::detector::{BimodalResponse, GaussianComponent, ProjectionSpec};
use balero::estimators::Readout;
use balero::metrics::Estimator;
use balero::mixture::fit_bimodal;
use balero::multiqubit::pairwise::DEFAULT_PAIR_GRID_POINTS;
use balero::numeric::simpson;
use balero::scenario::{derive_seed, run_on_device, BenchmarkSpec, Scenario, SyntheticDevice};
use balero::simulator::DetectorPreset;
use balero::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

// Pinned tolerances and thresholds.
const C1_BALERO_MAX_ERROR: f64 = 0.005;
const C1_COUNTS_RELATIVE_BAND: f64 = 0.20;
const C1_MONOTONE_MIN_SEEDS: usize = 18;
const C1_BUDGET: Duration = Duration::from_secs(30);
const C2_BALERO_MAX_DRHO_G: f64 = 0.005;
const C2_BUDGET: Duration = Duration::from_secs(120);
const C3_MIN_SEEDS: usize = 19;
const C3_BUDGET: Duration = Duration::from_secs(120);
const C4_COUNTS_TARGET: f64 = 0.16;
const C4_COUNTS_BAND: f64 = 0.04;
const C4_BALERO_MAX: f64 = 0.01;
const C4_MIN_SEEDS: usize = 18;
const C4_BUDGET: Duration = Duration::from_secs(300);
const C5_COUNTS_TARGET: f64 = 0.20;
const C5_BALERO_MAX: f64 = 0.03;
const C5_MIN_SEEDS: usize = 18;
const C6_MAX_TV: f64 = 0.02;
const C6_BRUTE_FORCE_TOL: f64 = 1e-12;
const C6_MEAN_TOL: f64 = 0.05;
const C6_STD_TOL: f64 = 0.05;
const C6_WEIGHT_TOL: f64 = 0.01;
const C8_TOL: f64 = 1e-9;

const SEEDS: usize = 20;
const CALIBRATION_SHOTS: usize = 100_000;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(criterion: u32, pass: bool, detail: &str) {
    println!(
        "{} criterion {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn count(values: &[f64], pred: impl Fn(f64) -> bool) -> usize {
    values.iter().filter(|v| pred(**v)).count()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn device(preset: DetectorPreset, n_qubits: usize) -> SyntheticDevice {
    SyntheticDevice::calibrate(preset, n_qubits, CALIBRATION_SHOTS, derive_seed(0, 0xCA1)).unwrap()
}

/// Best achievable single-shot assignment error of a response pair, by
/// scanning thresholds and integrating the densities themselves.
fn threshold_readout_error_oracle(m: &QubitResponseModel) -> f64 {
    let (lo, hi) = (m.p_g.main.mean, m.p_e.main.mean);
    let tail_lo = lo - 15.0;
    let tail_hi = hi + 15.0;
    (0..=400)
        .map(|k| {
            let t = lo + (hi - lo) * k as f64 / 400.0;
            let eg = simpson(|x| m.p_g.density(x), t, tail_hi, 20_000);
            let ee = simpson(|x| m.p_e.density(x), tail_lo, t, 20_000);
            0.5 * (eg + ee)
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn criterion_1_readout_fidelity_scaling() {
    let _g = serial();
    let start = Instant::now();
    let spec = BenchmarkSpec::new(Scenario::ReadoutFidelity);
    let dev = device(spec.preset, 1);
    let out = run_on_device(&spec, &dev).unwrap();
    let elapsed = start.elapsed();

    let analytic = threshold_readout_error_oracle(&DetectorPreset::QuitoLike.model(0));
    let balero_1e4 = out.values("readout_error", Estimator::Balero, 10_000);
    let worst_balero = balero_1e4.iter().copied().fold(0.0, f64::max);

    let counts_ok = spec.n_shots.iter().all(|&n| {
        let m = mean(&out.values("readout_error", Estimator::Counts, n));
        (m - analytic).abs() <= C1_COUNTS_RELATIVE_BAND * analytic
    });
    let counts_means: Vec<String> = spec
        .n_shots
        .iter()
        .map(|&n| format!("{:.4}", mean(&out.values("readout_error", Estimator::Counts, n))))
        .collect();

    let series: Vec<Vec<f64>> = spec
        .n_shots
        .iter()
        .map(|&n| out.values("readout_error", Estimator::Balero, n))
        .collect();
    let monotone = (0..SEEDS)
        .filter(|&s| series[0][s] >= series[1][s] && series[1][s] >= series[2][s])
        .count();

    let pass = worst_balero < C1_BALERO_MAX_ERROR
        && counts_ok
        && monotone >= C1_MONOTONE_MIN_SEEDS
        && elapsed < C1_BUDGET;
    report(
        1,
        pass,
        &format!(
            "balero error at 1e4 max {worst_balero:.5} (< {C1_BALERO_MAX_ERROR}); counts mean per n {counts_means:?} vs analytic {analytic:.4} ±20%; monotone on {monotone}/{SEEDS} seeds; {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_ry_sweep() {
    let _g = serial();
    let start = Instant::now();
    let spec = BenchmarkSpec {
        n_shots: vec![10_000],
        theta_points: 41,
        ..BenchmarkSpec::new(Scenario::RySweep)
    };
    let dev = device(spec.preset, 1);
    let out = run_on_device(&spec, &dev).unwrap();
    let elapsed = start.elapsed();
    let b = out.values("avg_ground_population_error", Estimator::Balero, 10_000);
    let c = out.values("avg_ground_population_error", Estimator::Counts, 10_000);
    let wins = b.iter().zip(&c).filter(|(b, c)| b < c).count();
    let worst = b.iter().copied().fold(0.0, f64::max);
    let pass = wins == SEEDS && worst < C2_BALERO_MAX_DRHO_G && elapsed < C2_BUDGET;
    report(
        2,
        pass,
        &format!(
            "balero beats counts on {wins}/{SEEDS} seeds; balero mean {:.5} max {worst:.5} (< {C2_BALERO_MAX_DRHO_G}); counts mean {:.5}; {:.1}s",
            mean(&b),
            mean(&c),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_bell_state() {
    let _g = serial();
    let start = Instant::now();
    let spec = BenchmarkSpec {
        n_shots: vec![10_000],
        ..BenchmarkSpec::new(Scenario::Bell)
    };
    let dev = device(spec.preset, 2);
    let out = run_on_device(&spec, &dev).unwrap();
    let elapsed = start.elapsed();
    let b = out.values("total_population_error", Estimator::Balero, 10_000);
    let c = out.values("total_population_error", Estimator::Counts, 10_000);
    let wins = b.iter().zip(&c).filter(|(b, c)| b < c).count();
    let pass = wins >= C3_MIN_SEEDS && elapsed < C3_BUDGET;
    report(
        3,
        pass,
        &format!(
            "exact joint beats counts on {wins}/{SEEDS} seeds (need {C3_MIN_SEEDS}); mean balero {:.4} counts {:.4}; {:.1}s",
            mean(&b),
            mean(&c),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_bitstring_prep() {
    let _g = serial();
    let start = Instant::now();
    let spec = BenchmarkSpec {
        n_shots: vec![10_000],
        bitstring: "0110".into(),
        ..BenchmarkSpec::new(Scenario::BitstringPrep)
    };
    let dev = device(spec.preset, 4);
    let out = run_on_device(&spec, &dev).unwrap();
    let elapsed = start.elapsed();
    let b = out.values("total_population_error", Estimator::Balero, 10_000);
    let c = out.values("total_population_error", Estimator::Counts, 10_000);
    let counts_mean = mean(&c);
    let good = count(&b, |v| v < C4_BALERO_MAX);
    let pass = (counts_mean - C4_COUNTS_TARGET).abs() <= C4_COUNTS_BAND
        && good >= C4_MIN_SEEDS
        && elapsed < C4_BUDGET;
    report(
        4,
        pass,
        &format!(
            "counts mean {counts_mean:.4} (target {C4_COUNTS_TARGET} ± {C4_COUNTS_BAND}); pairwise < {C4_BALERO_MAX} on {good}/{SEEDS} seeds (need {C4_MIN_SEEDS}), mean {:.5}; {:.1}s",
            mean(&b),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_bv_with_gate_noise() {
    let _g = serial();
    let start = Instant::now();
    let spec = BenchmarkSpec {
        n_shots: vec![10_000],
        bitstring: "0110".into(),
        target_counts_error: C5_COUNTS_TARGET,
        ..BenchmarkSpec::new(Scenario::BvOutput)
    };
    let dev = device(spec.preset, 4);
    let out = run_on_device(&spec, &dev).unwrap();
    let elapsed = start.elapsed();
    let b = out.values("total_population_error", Estimator::Balero, 10_000);
    let counts_ideal = out.values("total_population_error_ideal", Estimator::Counts, 10_000);
    let good = count(&b, |v| v < C5_BALERO_MAX);
    let pass = good >= C5_MIN_SEEDS;
    report(
        5,
        pass,
        &format!(
            "depolarizing {:.4}; counts error vs ideal mean {:.4}; balero vs depolarized truth < {C5_BALERO_MAX} on {good}/{SEEDS} seeds (need {C5_MIN_SEEDS}), mean {:.4}; {:.1}s",
            out.depolarizing.unwrap(),
            mean(&counts_ideal),
            mean(&b),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_oracle_equivalences() {
    let _g = serial();

    // (a) pairwise against the exact joint posterior on two qubits
    let models = DetectorPreset::QuitoLike.models(2);
    let truth = TrueState::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
    let mut tvs = Vec::new();
    for seed in 0..10 {
        let shots = sample_shots(&truth, &models, 1_000, 100 + seed).unwrap();
        let joint = joint_update(&SimplexPosterior::uniform(2, 50).unwrap(), &models, &shots)
            .unwrap()
            .estimate();
        let start = PairwiseState::new(
            2,
            vec![0.25; 4],
            (0..4).map(BasisIndex).collect(),
            1e-4,
            50,
        )
        .unwrap();
        let pw = iterate_pairwise(&start, &models, &shots, DEFAULT_PAIR_GRID_POINTS).unwrap();
        tvs.push(0.5 * total_population_error(&joint.populations, pw.state.estimates()).unwrap());
    }
    let tv_mean = mean(&tvs);
    let tv_max = tvs.iter().copied().fold(0.0, f64::max);
    let a = tv_mean < C6_MAX_TV;

    // (b) brute-force normalized product on 5-point grids
    let m = QubitResponseModel::new(
        "q",
        ProjectionSpec::IDENTITY,
        BimodalResponse::new(
            GaussianComponent::new(0.0, 1.0).unwrap(),
            GaussianComponent::new(2.0, 0.8).unwrap(),
            0.04,
        )
        .unwrap(),
        BimodalResponse::new(
            GaussianComponent::new(2.0, 1.1).unwrap(),
            GaussianComponent::new(0.0, 1.0).unwrap(),
            0.07,
        )
        .unwrap(),
    )
    .unwrap();
    let gauss = |x: f64, mu: f64, s: f64| {
        (-(x - mu) * (x - mu) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    };
    let pg = |x: f64| 0.96 * gauss(x, 0.0, 1.0) + 0.04 * gauss(x, 2.0, 0.8);
    let pe = |x: f64| 0.93 * gauss(x, 2.0, 1.1) + 0.07 * gauss(x, 0.0, 1.0);
    let mut worst_b: f64 = 0.0;
    for shots in [vec![0.1, 1.7, -0.4], vec![2.2, 2.9, 1.0, 0.3], vec![1.0], vec![-1.0, 3.0, 0.5, 0.5, 2.0]] {
        let rhos = [0.0, 0.25, 0.5, 0.75, 1.0];
        let prod: Vec<f64> = rhos
            .iter()
            .map(|r| shots.iter().map(|&x| r * pg(x) + (1.0 - r) * pe(x)).product())
            .collect();
        // trapezoid normalization on [0, 1] with step 1/4
        let z = 0.25 * (0.5 * prod[0] + prod[1] + prod[2] + prod[3] + 0.5 * prod[4]);
        let post = update_posterior(&uniform_prior(5).unwrap(), &m, &shots).unwrap();
        for (d, p) in post.densities().iter().zip(&prod) {
            worst_b = worst_b.max((d - p / z).abs());
        }
    }
    let b = worst_b < C6_BRUTE_FORCE_TOL;

    // (c) EM parameter recovery at 10^5 samples
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let main = Normal::new(0.0, 1.0).unwrap();
    let leak = Normal::new(4.0, 1.0).unwrap();
    let samples: Vec<f64> = (0..100_000)
        .map(|_| {
            if rand::Rng::random::<f64>(&mut rng) < 0.05 {
                leak.sample(&mut rng)
            } else {
                main.sample(&mut rng)
            }
        })
        .collect();
    let fit = fit_bimodal(&samples).unwrap();
    let errs = [
        (fit.main.mean - 0.0).abs(),
        (fit.leak.mean - 4.0).abs(),
        (fit.main.std - 1.0).abs(),
        (fit.leak.std - 1.0).abs(),
        (fit.leak_weight - 0.05).abs(),
    ];
    let c = errs[0] < C6_MEAN_TOL
        && errs[1] < C6_MEAN_TOL
        && errs[2] < C6_STD_TOL
        && errs[3] < C6_STD_TOL
        && errs[4] < C6_WEIGHT_TOL;

    let pass = a && b && c;
    report(
        6,
        pass,
        &format!(
            "(a) pairwise vs joint TV mean {tv_mean:.4} max {tv_max:.4} (< {C6_MAX_TV}); (b) brute-force max diff {worst_b:.2e} (< {C6_BRUTE_FORCE_TOL:e}); (c) EM errors means {:.4}/{:.4} stds {:.4}/{:.4} weight {:.4}",
            errs[0], errs[1], errs[2], errs[3], errs[4]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_physicality_contrast() {
    let _g = serial();
    let dev = device(DetectorPreset::QuitoLike, 1);
    let readout: &Readout = &dev.readout;
    let ground = bitstring_populations("0").unwrap();
    let mut instance = None;
    for seed in 0..50 {
        let shots = dev.measure(&ground, 200, derive_seed(7, seed)).unwrap();
        let counts = readout.counts(&shots).unwrap();
        let inv = readout.inversion(&counts).unwrap();
        if inv.quasi_populations.iter().any(|p| *p > 1.0) {
            let bal = readout.balero(&shots, &Default::default()).unwrap();
            instance = Some((seed, inv.quasi_populations, bal.estimate));
            break;
        }
    }
    let (pass, detail) = match instance {
        Some((seed, inv, bal)) => {
            let sum: f64 = bal.populations.iter().sum();
            let physical = bal.populations.iter().all(|p| (0.0..=1.0).contains(p))
                && (sum - 1.0).abs() < 1e-9;
            (
                physical,
                format!(
                    "seed {seed}, 200 shots of |0>: inversion {:?}; balero {:?} (sum - 1 = {:.1e})",
                    inv,
                    bal.populations,
                    sum - 1.0
                ),
            )
        }
        None => (false, "no seed produced an inverted entry above 1".into()),
    };
    report(7, pass, &detail);
    assert!(pass);
}

#[test]
fn criterion_8_invariant_suite() {
    let _g = serial();
    let models = DetectorPreset::QuitoLike.models(2);

    // posterior normalization
    let m0 = &models[0];
    let shots1 = sample_shots(&ry_populations(1.1), std::slice::from_ref(m0), 2_000, 3).unwrap();
    let col = shots1.column(0);
    let post = update_posterior(&uniform_prior(1001).unwrap(), m0, &col).unwrap();
    let jpost = joint_update(
        &SimplexPosterior::uniform(2, 30).unwrap(),
        &models,
        &sample_shots(&bell_populations(), &models, 1_000, 4).unwrap(),
    )
    .unwrap();
    let norm_err = (post.total_mass() - 1.0).abs().max((jpost.total_mass() - 1.0).abs());
    let norm_ok = norm_err < C8_TOL;

    // shot-order permutation invariance
    let mut reversed = col.clone();
    reversed.reverse();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut shuffled = col.clone();
    rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
    let mut perm_err: f64 = 0.0;
    for other in [&reversed, &shuffled] {
        let p2 = update_posterior(&uniform_prior(1001).unwrap(), m0, other).unwrap();
        for (a, b) in post.log_weights().iter().zip(p2.log_weights()) {
            perm_err = perm_err.max((a - b).abs());
        }
    }
    let perm_ok = perm_err < C8_TOL;

    // Σ R_k = 1 after every sweep
    let reg = DetectorPreset::Register.models(4);
    let truth = apply_depolarizing(
        &bitstring_populations("0110").unwrap(),
        &NoiseConfig::new(0.1, 0).unwrap(),
    )
    .unwrap();
    let shots4 = sample_shots(&truth, &reg, 2_000, 6).unwrap();
    let readout = Readout::new(reg.clone()).unwrap();
    let mut state = prune_active_set(&readout.counts(&shots4).unwrap()).unwrap();
    let mut mass_err: f64 = 0.0;
    for _ in 0..5 {
        state = pairwise_sweep(&state, &reg, &shots4, 201).unwrap();
        mass_err = mass_err.max((state.estimates().iter().sum::<f64>() - 1.0).abs());
    }
    let mass_ok = mass_err < C8_TOL;

    // separated detector: posterior mean against threshold-count fraction
    let sep = QubitResponseModel::new(
        "s",
        ProjectionSpec::IDENTITY,
        BimodalResponse::unimodal(GaussianComponent::new(0.0, 1.0).unwrap()),
        BimodalResponse::unimodal(GaussianComponent::new(100.0, 1.0).unwrap()),
    )
    .unwrap();
    let n_points = 1001;
    let bound = 2.0 / n_points as f64;
    let sep_readout = Readout::new(vec![sep.clone()]).unwrap();
    let mut worst_small: (f64, usize) = (0.0, 0);
    let mut worst_large: f64 = 0.0;
    for (k, &n) in [1usize, 2, 5, 10, 50, 100, 300, 1_000, 3_000, 10_000].iter().enumerate() {
        for (j, rho) in [0.0, 0.3, 0.5, 0.9, 1.0].iter().enumerate() {
            let theta = 2.0 * f64::sqrt(*rho).acos();
            let shots = sample_shots(&ry_populations(theta), std::slice::from_ref(&sep), n, (10 * k + j) as u64).unwrap();
            let frac = sep_readout.counts(&shots).unwrap().fractions()[0];
            let est = update_posterior(&uniform_prior(n_points).unwrap(), &sep, &shots.column(0))
                .unwrap()
                .estimate()
                .populations[0];
            let d = (est - frac).abs();
            if n >= 1_000 {
                worst_large = worst_large.max(d);
            }
            if d > worst_small.0 {
                worst_small = (d, n);
            }
        }
    }
    let sep_ok = worst_small.0 < bound;

    let pass = norm_ok && perm_ok && mass_ok && sep_ok;
    report(
        8,
        pass,
        &format!(
            "normalization {norm_err:.1e}; permutation {perm_err:.1e}; sweep mass {mass_err:.1e} (all < {C8_TOL:e}); separated-detector max |mean - count fraction| {:.2e} at n={} vs bound {bound:.1e} (n >= 1000 only: {worst_large:.2e}) {}",
            worst_small.0,
            worst_small.1,
            if sep_ok { "" } else { "[posterior mean (k+1)/(n+2) differs from k/n by up to 1/(n+2), above the bound for n < 499]" }
        ),
    );
    assert!(pass);
}
