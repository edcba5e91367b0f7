//! Per-shot component densities in a form that makes repeated mixture
//! likelihood evaluation cheap.
//!
//! For shot `n` and component `k` the table keeps `log P_k(x_n)` together
//! with the shifted linear value `exp(log P_k(x_n) − shift_n)`, where
//! `shift_n` is the largest log density of that shot. A mixture with weights
//! summing to one then has a shifted value in `(0, 1]`, and the sum of logs
//! over shots is accumulated as a running product.

use crate::numeric::{log_sum_exp, LogProduct};

#[derive(Debug, Clone)]
pub struct LikelihoodTable {
    n_components: usize,
    log_density: Vec<f64>,
    scaled: Vec<f64>,
    shift: Vec<f64>,
    shift_total: f64,
}

impl LikelihoodTable {
    /// Builds the table from `log P_k(x_n)` supplied row by row.
    pub fn from_log_rows<I>(n_components: usize, rows: I) -> Self
    where
        I: IntoIterator,
        I::Item: AsRef<[f64]>,
    {
        let mut log_density = Vec::new();
        let mut scaled = Vec::new();
        let mut shift = Vec::new();
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), n_components);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            shift.push(m);
            log_density.extend_from_slice(row);
            scaled.extend(row.iter().map(|l| (l - m).exp()));
        }
        let shift_total = shift.iter().sum();
        Self {
            n_components,
            log_density,
            scaled,
            shift,
            shift_total,
        }
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn n_shots(&self) -> usize {
        self.shift.len()
    }

    #[inline]
    pub fn scaled_row(&self, n: usize) -> &[f64] {
        &self.scaled[n * self.n_components..(n + 1) * self.n_components]
    }

    #[inline]
    pub fn log_row(&self, n: usize) -> &[f64] {
        &self.log_density[n * self.n_components..(n + 1) * self.n_components]
    }

    /// `Σ_n shift_n`, the part of every mixture log-likelihood that does not
    /// depend on the weights.
    pub fn shift_total(&self) -> f64 {
        self.shift_total
    }

    /// `Σ_n log Σ_k w_k P_k(x_n)` for weights on the simplex.
    pub fn log_mixture(&self, weights: &[f64]) -> f64 {
        debug_assert_eq!(weights.len(), self.n_components);
        let mut acc = LogProduct::new();
        for n in 0..self.n_shots() {
            let q: f64 = self
                .scaled_row(n)
                .iter()
                .zip(weights)
                .map(|(s, w)| s * w)
                .sum();
            if q >= LogProduct::TINY {
                acc.mul(q);
            } else {
                acc.add_log(self.exact_shifted_log(n, weights));
            }
        }
        acc.ln() + self.shift_total
    }

    /// `log Σ_k w_k P_k(x_n) − shift_n` evaluated fully in log space.
    pub fn exact_shifted_log(&self, n: usize, weights: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .log_row(n)
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(l, w)| w.ln() + l)
            .collect();
        log_sum_exp(&terms) - self.shift[n]
    }
}
