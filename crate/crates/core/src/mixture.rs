//! Two-component Gaussian mixture fitting by expectation-maximization.
//!
//! Samples are centered on their mean before fitting. Initial centers come
//! from several k-means++ seedings refined by Lloyd iterations (plus an
//! optional caller hint); each candidate runs a short EM warm-up and the best
//! one is carried to convergence. When the second component does not pay for
//! its extra parameters under BIC, the fit collapses to a single Gaussian
//! with zero leak weight.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detector::{BimodalResponse, GaussianComponent};
use crate::error::{Error, Result};
use crate::numeric::LN_SQRT_2PI;

pub const MIN_SAMPLES: usize = 100;
pub const MAX_ITERATIONS: usize = 500;
/// Convergence threshold on the per-sample log-likelihood gain.
pub const TOLERANCE: f64 = 1e-10;
/// Component std floor, relative to the overall sample std.
pub const STD_FLOOR: f64 = 1e-6;

const KMEANS_RESTARTS: usize = 4;
const WARMUP_ITERATIONS: usize = 25;
const SEED: u64 = 0x00ba_1e50;

#[derive(Debug, Clone)]
pub struct MixtureFit {
    pub response: BimodalResponse,
    /// Total log-likelihood before each M-step of the selected EM run.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// The two-component fit lost to a single Gaussian under BIC.
    pub collapsed: bool,
}

/// Maximum-likelihood bimodal response for `samples`.
pub fn fit_bimodal(samples: &[f64]) -> Result<BimodalResponse> {
    Ok(fit_bimodal_with_hint(samples, None)?.response)
}

/// Like [`fit_bimodal`], with optional initial centers `[main, leak]`
/// added to the candidate set, and the full fit report.
pub fn fit_bimodal_with_hint(samples: &[f64], hint: Option<[f64; 2]>) -> Result<MixtureFit> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite sample".into()));
    }
    let n = samples.len() as f64;
    let center = samples.iter().sum::<f64>() / n;
    let xs: Vec<f64> = samples.iter().map(|x| x - center).collect();
    let std = (xs.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    if !(std > 0.0) {
        return Err(Error::FitDiverged("samples have zero variance".into()));
    }
    let floor = STD_FLOOR * std;

    let mut candidates: Vec<Params> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ samples.len() as u64);
    for _ in 0..KMEANS_RESTARTS {
        let seeds = kmeans_pp(&xs, &mut rng);
        let centers = lloyd(&xs, seeds);
        if let Some(p) = Params::from_centers(&xs, centers, floor) {
            candidates.push(p);
        }
    }
    if let Some([a, b]) = hint {
        if let Some(p) = Params::from_centers(&xs, [a - center, b - center], floor) {
            candidates.push(p);
        }
    }
    if candidates.is_empty() {
        return Err(Error::FitDiverged("no usable two-center split".into()));
    }

    let mut runs: Vec<(Params, Vec<f64>)> = candidates
        .into_iter()
        .map(|mut p| {
            let mut trace = Vec::with_capacity(MAX_ITERATIONS);
            for _ in 0..WARMUP_ITERATIONS {
                trace.push(p.em_step(&xs, floor));
            }
            (p, trace)
        })
        .collect();
    runs.sort_by(|a, b| {
        let la = a.0.log_likelihood(&xs);
        let lb = b.0.log_likelihood(&xs);
        lb.total_cmp(&la)
    });
    let (mut params, mut trace) = runs.swap_remove(0);

    let mut converged = false;
    while trace.len() < MAX_ITERATIONS {
        let ll = params.em_step(&xs, floor);
        let gain = ll - trace.last().copied().unwrap_or(f64::NEG_INFINITY);
        trace.push(ll);
        if gain.abs() / n < TOLERANCE {
            converged = true;
            break;
        }
    }
    let ll2 = params.log_likelihood(&xs);

    for (w, s) in [(params.w[0], params.s[0]), (params.w[1], params.s[1])] {
        if w > 0.0 && s <= floor * (1.0 + 1e-9) {
            return Err(Error::FitDiverged(format!(
                "component std collapsed to the floor ({s:e})"
            )));
        }
    }

    // Single Gaussian MLE versus the mixture under BIC (3 extra parameters).
    let ll1 = -n * (std.ln() + LN_SQRT_2PI + 0.5);
    let collapsed = ll2 - ll1 < 1.5 * n.ln() || params.w.iter().any(|&w| w * n < 1.0);

    let response = if collapsed {
        BimodalResponse::unimodal(GaussianComponent::new(center, std)?)
    } else {
        let (main, leak) = if params.w[0] >= params.w[1] { (0, 1) } else { (1, 0) };
        BimodalResponse::new(
            GaussianComponent::new(params.m[main] + center, params.s[main])?,
            GaussianComponent::new(params.m[leak] + center, params.s[leak])?,
            params.w[leak],
        )?
    };

    Ok(MixtureFit {
        response,
        iterations: trace.len(),
        log_likelihood_trace: trace,
        converged,
        collapsed,
    })
}

#[derive(Debug, Clone, Copy)]
struct Params {
    w: [f64; 2],
    m: [f64; 2],
    s: [f64; 2],
}

impl Params {
    fn from_centers(xs: &[f64], centers: [f64; 2], floor: f64) -> Option<Self> {
        let mut cnt = [0.0; 2];
        let mut sum = [0.0; 2];
        let mut sq = [0.0; 2];
        for &x in xs {
            let k = usize::from((x - centers[1]).abs() < (x - centers[0]).abs());
            cnt[k] += 1.0;
            sum[k] += x;
            sq[k] += x * x;
        }
        if cnt[0] < 2.0 || cnt[1] < 2.0 {
            return None;
        }
        let n = xs.len() as f64;
        let mut p = Params {
            w: [cnt[0] / n, cnt[1] / n],
            m: [sum[0] / cnt[0], sum[1] / cnt[1]],
            s: [0.0; 2],
        };
        for k in 0..2 {
            p.s[k] = (sq[k] / cnt[k] - p.m[k] * p.m[k]).max(0.0).sqrt().max(floor);
        }
        Some(p)
    }

    fn log_terms(&self) -> [(f64, f64); 2] {
        [0, 1].map(|k| (self.w[k].ln() - self.s[k].ln() - LN_SQRT_2PI, 0.5 / (self.s[k] * self.s[k])))
    }

    fn log_likelihood(&self, xs: &[f64]) -> f64 {
        let t = self.log_terms();
        xs.iter()
            .map(|&x| {
                let a = t[0].0 - t[0].1 * (x - self.m[0]).powi(2);
                let b = t[1].0 - t[1].1 * (x - self.m[1]).powi(2);
                let hi = a.max(b);
                hi + (-(a - b).abs()).exp().ln_1p()
            })
            .sum()
    }

    /// One EM iteration; returns the log-likelihood of the parameters it
    /// started from.
    fn em_step(&mut self, xs: &[f64], floor: f64) -> f64 {
        let t = self.log_terms();
        let mut ll = 0.0;
        let mut r_sum = [0.0; 2];
        let mut rx = [0.0; 2];
        let mut rxx = [0.0; 2];
        for &x in xs {
            let a = t[0].0 - t[0].1 * (x - self.m[0]).powi(2);
            let b = t[1].0 - t[1].1 * (x - self.m[1]).powi(2);
            // responsibility of component 0
            let d = b - a;
            let (r0, lse) = if d > 0.0 {
                let e = (-d).exp();
                (e / (1.0 + e), b + e.ln_1p())
            } else {
                let e = d.exp();
                (1.0 / (1.0 + e), a + e.ln_1p())
            };
            ll += lse;
            let r1 = 1.0 - r0;
            r_sum[0] += r0;
            r_sum[1] += r1;
            rx[0] += r0 * x;
            rx[1] += r1 * x;
            rxx[0] += r0 * x * x;
            rxx[1] += r1 * x * x;
        }
        let n = xs.len() as f64;
        for k in 0..2 {
            if r_sum[k] <= 0.0 {
                self.w[k] = 0.0;
                continue;
            }
            self.w[k] = r_sum[k] / n;
            self.m[k] = rx[k] / r_sum[k];
            let var = rxx[k] / r_sum[k] - self.m[k] * self.m[k];
            self.s[k] = var.max(0.0).sqrt().max(floor);
        }
        ll
    }
}

fn kmeans_pp<R: Rng>(xs: &[f64], rng: &mut R) -> [f64; 2] {
    let first = xs[rng.random_range(0..xs.len())];
    let total: f64 = xs.iter().map(|x| (x - first).powi(2)).sum();
    if total <= 0.0 {
        return [first, first];
    }
    let mut target = rng.random::<f64>() * total;
    for &x in xs {
        target -= (x - first).powi(2);
        if target <= 0.0 {
            return [first, x];
        }
    }
    [first, xs[xs.len() - 1]]
}

fn lloyd(xs: &[f64], mut centers: [f64; 2]) -> [f64; 2] {
    for _ in 0..100 {
        let mid = 0.5 * (centers[0] + centers[1]);
        let lower = centers[0] <= centers[1];
        let mut cnt = [0usize; 2];
        let mut sum = [0.0; 2];
        for &x in xs {
            let k = usize::from((x > mid) == lower);
            cnt[k] += 1;
            sum[k] += x;
        }
        let mut next = centers;
        for k in 0..2 {
            if cnt[k] > 0 {
                next[k] = sum[k] / cnt[k] as f64;
            }
        }
        if next == centers {
            break;
        }
        centers = next;
    }
    centers
}
