//! Small numerical kernels shared by the inference modules.

use statrs::function::erf::erfc;

/// `ln(sqrt(2π))`
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn normal_log_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - std.ln() - LN_SQRT_2PI
}

/// Gaussian CDF through `erfc`, accurate in both tails.
pub fn normal_cdf(x: f64, mean: f64, std: f64) -> f64 {
    0.5 * erfc(-(x - mean) / (std * std::f64::consts::SQRT_2))
}

#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Trapezoidal weights for `n` uniformly spaced nodes on `[0, 1]`.
pub fn trapezoid_weights(n: usize) -> Vec<f64> {
    let h = 1.0 / (n - 1) as f64;
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

/// Composite Simpson rule for `f` on `[lo, hi]` with `intervals` (rounded up
/// to even) sub-intervals.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (hi - lo) / n as f64;
    let mut sum = f(lo) + f(hi);
    for k in 1..n {
        let x = lo + k as f64 * h;
        sum += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    sum * h / 3.0
}

/// Sums logarithms of factors in `(0, 1]` by multiplying them and taking one
/// logarithm per underflow window.
///
/// Factors below [`LogProduct::TINY`] must go through [`LogProduct::add_log`]
/// so the running product never leaves the normal range.
#[derive(Debug, Clone, Copy)]
pub struct LogProduct {
    product: f64,
    logs: f64,
}

impl LogProduct {
    pub const TINY: f64 = 1e-100;
    const FLUSH: f64 = 1e-200;

    #[inline]
    pub fn new() -> Self {
        Self {
            product: 1.0,
            logs: 0.0,
        }
    }

    #[inline]
    pub fn mul(&mut self, factor: f64) {
        debug_assert!(factor >= Self::TINY);
        self.product *= factor;
        if self.product < Self::FLUSH {
            self.logs += self.product.ln();
            self.product = 1.0;
        }
    }

    #[inline]
    pub fn add_log(&mut self, value: f64) {
        self.logs += value;
    }

    #[inline]
    pub fn ln(self) -> f64 {
        self.logs + self.product.ln()
    }
}

impl Default for LogProduct {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_product_matches_direct_sum() {
        let factors: Vec<f64> = (1..5000).map(|k| 1.0 / (1.0 + (k % 97) as f64)).collect();
        let mut acc = LogProduct::new();
        for &f in &factors {
            acc.mul(f);
        }
        let direct: f64 = factors.iter().map(|f| f.ln()).sum();
        assert!((acc.ln() - direct).abs() < 1e-9 * direct.abs());
    }

    #[test]
    fn log_add_exp_handles_infinities() {
        assert_eq!(log_add_exp(f64::NEG_INFINITY, -3.0), -3.0);
        assert!((log_add_exp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((log_add_exp(-1000.0, -1000.0) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn simpson_integrates_gaussian() {
        let v = simpson(|x| normal_log_pdf(x, 1.0, 0.5).exp(), -4.0, 6.0, 2000);
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cdf_tails() {
        assert!((normal_cdf(0.0, 0.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(-1.6448536269514722, 0.0, 1.0) - 0.05).abs() < 1e-10);
        assert!(normal_cdf(-30.0, 0.0, 1.0) > 0.0);
    }
}
