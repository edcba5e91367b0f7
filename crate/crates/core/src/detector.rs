//! Detector response functions and their calibration.
//!
//! A readout shot is a point in the IQ plane. Calibration rotates and
//! projects both prepared clouds onto the line joining their centroids, then
//! fits each projected cloud with a two-component Gaussian mixture: a main
//! peak and a leak peak that absorbs thermal population and decay during the
//! readout window.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::fit_bimodal_with_hint;
use crate::numeric::{log_add_exp, normal_cdf, normal_log_pdf, simpson};

/// One demodulated readout shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IQShot {
    pub i: f64,
    pub q: f64,
}

impl IQShot {
    pub fn new(i: f64, q: f64) -> Result<Self> {
        if !(i.is_finite() && q.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite IQ shot ({i}, {q})")));
        }
        Ok(Self { i, q })
    }
}

/// Affine map from the IQ plane to the scalar detector axis:
/// `x = cos(angle)·i + sin(angle)·q − offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub angle: f64,
    pub offset: f64,
}

impl ProjectionSpec {
    pub const IDENTITY: ProjectionSpec = ProjectionSpec {
        angle: 0.0,
        offset: 0.0,
    };

    pub fn new(angle: f64, offset: f64) -> Self {
        Self {
            angle: wrap_angle(angle),
            offset,
        }
    }

    #[inline]
    pub fn project(&self, shot: IQShot) -> f64 {
        let (s, c) = self.angle.sin_cos();
        c * shot.i + s * shot.q - self.offset
    }

    /// Same axis, opposite direction.
    pub fn flipped(&self) -> Self {
        Self::new(self.angle + PI, -self.offset)
    }

    /// Lifts a projected value back to the IQ plane, displaced by
    /// `transverse` along the orthogonal axis.
    pub fn lift(&self, x: f64, transverse: f64) -> IQShot {
        let (s, c) = self.angle.sin_cos();
        let along = x + self.offset;
        IQShot {
            i: c * along - s * transverse,
            q: s * along + c * transverse,
        }
    }
}

/// Free-function form of [`ProjectionSpec::project`].
pub fn project(spec: &ProjectionSpec, shot: IQShot) -> f64 {
    spec.project(shot)
}

/// Maps an angle into `(−π, π]`.
fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Projection along the line joining the two cloud centroids, centered so
/// the projected centroids sit at `∓d/2`.
pub fn fit_projection(ground: &[IQShot], excited: &[IQShot]) -> Result<ProjectionSpec> {
    for (shots, _) in [(ground, "ground"), (excited, "excited")] {
        if shots.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: shots.len(),
            });
        }
    }
    let (gi, gq) = centroid(ground);
    let (ei, eq) = centroid(excited);
    let (di, dq) = (ei - gi, eq - gq);
    let distance = di.hypot(dq);
    if distance < 1e-12 {
        return Err(Error::DegenerateClouds { distance });
    }
    let angle = dq.atan2(di);
    let (s, c) = angle.sin_cos();
    let offset = c * 0.5 * (gi + ei) + s * 0.5 * (gq + eq);
    Ok(ProjectionSpec::new(angle, offset))
}

fn centroid(shots: &[IQShot]) -> (f64, f64) {
    let n = shots.len() as f64;
    let (si, sq) = shots
        .iter()
        .fold((0.0, 0.0), |(a, b), s| (a + s.i, b + s.q));
    (si / n, sq / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: f64,
    pub std: f64,
}

impl GaussianComponent {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        let c = Self { mean, std };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() || !(self.std.is_finite() && self.std > 0.0) {
            return Err(Error::InvalidInput(format!(
                "Gaussian component needs finite mean and positive std, got N({}, {})",
                self.mean, self.std
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn log_pdf(&self, x: f64) -> f64 {
        normal_log_pdf(x, self.mean, self.std)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        normal_cdf(x, self.mean, self.std)
    }
}

/// `(1 − w)·N(x; main) + w·N(x; leak)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BimodalResponse {
    pub main: GaussianComponent,
    pub leak: GaussianComponent,
    pub leak_weight: f64,
}

impl BimodalResponse {
    pub fn new(main: GaussianComponent, leak: GaussianComponent, leak_weight: f64) -> Result<Self> {
        let r = Self {
            main,
            leak,
            leak_weight,
        };
        r.validate()?;
        Ok(r)
    }

    /// Single Gaussian; the leak slot mirrors the main component at zero weight.
    pub fn unimodal(main: GaussianComponent) -> Self {
        Self {
            main,
            leak: main,
            leak_weight: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.main.validate()?;
        self.leak.validate()?;
        if !(0.0..1.0).contains(&self.leak_weight) {
            return Err(Error::InvalidInput(format!(
                "leak weight must lie in [0, 1), got {}",
                self.leak_weight
            )));
        }
        Ok(())
    }

    /// Log of the mixture density, evaluated by log-sum-exp of the weighted
    /// component terms.
    #[inline]
    pub fn log_density(&self, x: f64) -> f64 {
        let main = (1.0 - self.leak_weight).ln() + self.main.log_pdf(x);
        if self.leak_weight == 0.0 {
            return main;
        }
        log_add_exp(main, self.leak_weight.ln() + self.leak.log_pdf(x))
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (1.0 - self.leak_weight) * self.main.cdf(x) + self.leak_weight * self.leak.cdf(x)
    }

    pub fn max_std(&self) -> f64 {
        self.main.std.max(self.leak.std)
    }

    pub fn min_std(&self) -> f64 {
        self.main.std.min(self.leak.std)
    }

    /// `[lo, hi]` covering both components out to `k` standard deviations.
    pub fn support(&self, k: f64) -> (f64, f64) {
        let lo = (self.main.mean - k * self.main.std).min(self.leak.mean - k * self.leak.std);
        let hi = (self.main.mean + k * self.main.std).max(self.leak.mean + k * self.leak.std);
        (lo, hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let c = if rng.random::<f64>() < self.leak_weight {
            &self.leak
        } else {
            &self.main
        };
        let z: f64 = StandardNormal.sample(rng);
        c.mean + c.std * z
    }
}

/// Free-function form of [`BimodalResponse::log_density`].
pub fn eval_log_density(resp: &BimodalResponse, x: f64) -> f64 {
    resp.log_density(x)
}

/// Calibrated response pair for one qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitResponseModel {
    pub qubit_id: String,
    pub projection: ProjectionSpec,
    pub p_g: BimodalResponse,
    pub p_e: BimodalResponse,
}

impl QubitResponseModel {
    pub fn new(
        qubit_id: impl Into<String>,
        projection: ProjectionSpec,
        p_g: BimodalResponse,
        p_e: BimodalResponse,
    ) -> Result<Self> {
        let m = Self {
            qubit_id: qubit_id.into(),
            projection,
            p_g,
            p_e,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.p_g.validate()?;
        self.p_e.validate()?;
        if self.p_g.main.mean == self.p_e.main.mean {
            return Err(Error::Indistinguishable(self.qubit_id.clone()));
        }
        Ok(())
    }

    /// Response for the given bit (0 = ground, 1 = excited).
    #[inline]
    pub fn response(&self, excited: bool) -> &BimodalResponse {
        if excited {
            &self.p_e
        } else {
            &self.p_g
        }
    }

    /// `∫ min(P_g, P_e) dx` by Simpson quadrature over both supports.
    pub fn overlap(&self) -> f64 {
        let (glo, ghi) = self.p_g.support(12.0);
        let (elo, ehi) = self.p_e.support(12.0);
        let (lo, hi) = (glo.min(elo), ghi.max(ehi));
        let step = self.p_g.min_std().min(self.p_e.min_std()) / 40.0;
        let intervals = (((hi - lo) / step).ceil() as usize).clamp(2_000, 4_000_000);
        simpson(
            |x| self.p_g.log_density(x).min(self.p_e.log_density(x)).exp(),
            lo,
            hi,
            intervals,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDataset {
    pub qubit_id: String,
    pub ground_shots: Vec<IQShot>,
    pub excited_shots: Vec<IQShot>,
}

impl CalibrationDataset {
    pub fn n_shots(&self) -> usize {
        self.ground_shots.len() + self.excited_shots.len()
    }
}

/// Fits the projection and both response functions for one qubit.
///
/// The returned model is canonically oriented: the ground main peak sits
/// below the excited main peak on the projected axis.
pub fn calibrate_qubit(dataset: &CalibrationDataset) -> Result<QubitResponseModel> {
    if dataset.ground_shots.is_empty() {
        return Err(Error::MissingBlock {
            qubit: dataset.qubit_id.clone(),
            prepared: "ground",
        });
    }
    if dataset.excited_shots.is_empty() {
        return Err(Error::MissingBlock {
            qubit: dataset.qubit_id.clone(),
            prepared: "excited",
        });
    }
    let mut projection = fit_projection(&dataset.ground_shots, &dataset.excited_shots)?;
    let xg: Vec<f64> = dataset.ground_shots.iter().map(|s| projection.project(*s)).collect();
    let xe: Vec<f64> = dataset.excited_shots.iter().map(|s| projection.project(*s)).collect();
    let cg = xg.iter().sum::<f64>() / xg.len() as f64;
    let ce = xe.iter().sum::<f64>() / xe.len() as f64;

    // Each state's leak peak starts on the other state's cloud.
    let mut p_g = fit_bimodal_with_hint(&xg, Some([cg, ce]))?.response;
    let mut p_e = fit_bimodal_with_hint(&xe, Some([ce, cg]))?.response;

    if p_g.main.mean > p_e.main.mean {
        projection = projection.flipped();
        for r in [&mut p_g, &mut p_e] {
            r.main.mean = -r.main.mean;
            r.leak.mean = -r.leak.mean;
        }
    }
    QubitResponseModel::new(dataset.qubit_id.clone(), projection, p_g, p_e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn n(mean: f64, std: f64) -> GaussianComponent {
        GaussianComponent::new(mean, std).unwrap()
    }

    #[test]
    fn projection_axis_aligned() {
        let g = [IQShot { i: -0.1, q: 0.0 }, IQShot { i: 0.1, q: 0.0 }];
        let e = [IQShot { i: 0.9, q: 0.0 }, IQShot { i: 1.1, q: 0.0 }];
        let p = fit_projection(&g, &e).unwrap();
        assert_abs_diff_eq!(p.angle, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.offset, 0.5, epsilon = 1e-12);

        let g = [IQShot { i: 0.0, q: -0.2 }, IQShot { i: 0.0, q: 0.2 }];
        let e = [IQShot { i: 0.0, q: 1.8 }, IQShot { i: 0.0, q: 2.2 }];
        let p = fit_projection(&g, &e).unwrap();
        assert_abs_diff_eq!(p.angle, PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.offset, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_of_sampled_diagonal_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cloud = |cx: f64, cy: f64, rng: &mut ChaCha8Rng| -> Vec<IQShot> {
            (0..10_000)
                .map(|_| {
                    let zi: f64 = StandardNormal.sample(rng);
                    let zq: f64 = StandardNormal.sample(rng);
                    IQShot { i: cx + 0.5 * zi, q: cy + 0.5 * zq }
                })
                .collect()
        };
        let g = cloud(1.0, 1.0, &mut rng);
        let e = cloud(3.0, 3.0, &mut rng);
        // sample-mean oracle
        let mean = |s: &[IQShot]| {
            let n = s.len() as f64;
            (s.iter().map(|p| p.i).sum::<f64>() / n, s.iter().map(|p| p.q).sum::<f64>() / n)
        };
        let (gm, em) = (mean(&g), mean(&e));
        let oracle = (em.1 - gm.1).atan2(em.0 - gm.0);
        let p = fit_projection(&g, &e).unwrap();
        assert_abs_diff_eq!(p.angle, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(p.angle, PI / 4.0, epsilon = 0.02);
    }

    #[test]
    fn projection_rejects_identical_centroids() {
        let g = [IQShot { i: 1.0, q: 1.0 }, IQShot { i: 1.0, q: 1.0 }];
        assert!(matches!(
            fit_projection(&g, &g),
            Err(Error::DegenerateClouds { .. })
        ));
        assert!(matches!(
            fit_projection(&g[..1], &g),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn project_examples() {
        let p = ProjectionSpec::new(0.0, 0.0);
        assert_eq!(p.project(IQShot { i: 2.5, q: 7.0 }), 2.5);
        let p = ProjectionSpec::new(PI / 2.0, 1.0);
        assert_abs_diff_eq!(p.project(IQShot { i: 3.0, q: 4.0 }), 3.0, epsilon = 1e-12);
        let p = ProjectionSpec::new(PI / 4.0, 0.0);
        assert_abs_diff_eq!(p.project(IQShot { i: 1.0, q: 1.0 }), 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn lift_inverts_projection() {
        let p = ProjectionSpec::new(0.7, -0.3);
        let shot = p.lift(1.25, 0.4);
        assert_abs_diff_eq!(p.project(shot), 1.25, epsilon = 1e-12);
    }

    #[test]
    fn flipped_projection_negates() {
        let p = ProjectionSpec::new(2.9, 0.4);
        let f = p.flipped();
        assert!(f.angle > -PI && f.angle <= PI);
        let s = IQShot { i: 0.3, q: -1.2 };
        assert_abs_diff_eq!(f.project(s), -p.project(s), epsilon = 1e-12);
    }

    #[test]
    fn log_density_examples() {
        let r = BimodalResponse::unimodal(n(0.0, 1.0));
        assert_abs_diff_eq!(r.log_density(0.0), -0.918_938_533_204_672_7, epsilon = 1e-12);

        let r = BimodalResponse::new(n(0.0, 1.0), n(0.0, 1.0), 0.5).unwrap();
        for x in [-3.0, 0.1, 2.0] {
            assert_abs_diff_eq!(r.log_density(x), n(0.0, 1.0).log_pdf(x), epsilon = 1e-12);
        }

        // direct summation of the two weighted densities
        let r = BimodalResponse::new(n(0.0, 1.0), n(5.0, 2.0), 0.1).unwrap();
        let pdf = |x: f64, m: f64, s: f64| {
            (-(x - m) * (x - m) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt())
        };
        let oracle = (0.9 * pdf(5.0, 0.0, 1.0) + 0.1 * pdf(5.0, 5.0, 2.0)).ln();
        assert_abs_diff_eq!(r.log_density(5.0), oracle, epsilon = 1e-13);
    }

    #[test]
    fn log_density_finite_far_out() {
        let r = BimodalResponse::new(n(0.0, 1.0), n(5.0, 2.0), 0.1).unwrap();
        assert!(r.log_density(1e6).is_finite());
        assert!(r.log_density(-1e6).is_finite());
    }

    #[test]
    fn bimodal_normalizes() {
        let r = BimodalResponse::new(n(-0.2, 0.7), n(3.0, 1.4), 0.07).unwrap();
        let (lo, hi) = (r.main.mean.min(r.leak.mean) - 10.0 * r.max_std(), r.main.mean.max(r.leak.mean) + 10.0 * r.max_std());
        let v = simpson(|x| r.density(x), lo, hi, 20_000);
        assert!((v - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GaussianComponent::new(0.0, 0.0).is_err());
        assert!(GaussianComponent::new(f64::NAN, 1.0).is_err());
        assert!(BimodalResponse::new(n(0.0, 1.0), n(1.0, 1.0), 1.0).is_err());
        assert!(IQShot::new(f64::INFINITY, 0.0).is_err());
        let r = BimodalResponse::unimodal(n(0.0, 1.0));
        assert!(matches!(
            QubitResponseModel::new("q0", ProjectionSpec::IDENTITY, r, r),
            Err(Error::Indistinguishable(_))
        ));
    }

    #[test]
    fn calibrate_rejects_missing_block() {
        let ds = CalibrationDataset {
            qubit_id: "q3".into(),
            ground_shots: vec![IQShot { i: 0.0, q: 0.0 }; 200],
            excited_shots: vec![],
        };
        match calibrate_qubit(&ds) {
            Err(Error::MissingBlock { qubit, prepared }) => {
                assert_eq!(qubit, "q3");
                assert_eq!(prepared, "excited");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
