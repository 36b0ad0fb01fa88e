//! Cumulative lagged product-moment process and the portmanteau statistics.
//!
//! For a lag `h` the process
//! `M̂_h(u) = T⁻¹ Σ_{t ≤ ⌊uT⌋ ∧ (T-h)} X_t ⊗ X_{t+h}` is a step function of the
//! rescaled time `u`, so its L² norm over `[0,1]³` is the exact sum of `T`
//! rectangles. In Fourier coordinates the kernel `X_t ⊗ X_{t+h}` becomes the
//! outer product `a_t a_{t+h}ᵀ` and the L²([0,1]²) norm becomes the Frobenius
//! norm.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CoefficientSeries, FunctionalSeries};

/// Running partial sum `A_s = M̂_h(s/T)` together with `T⁻¹ Σ_{r ≤ s} ‖A_r‖²_F`.
#[derive(Debug, Clone)]
pub struct LagCovAccumulator {
    lag: usize,
    series_len: usize,
    dim: usize,
    position: usize,
    partial: Vec<f64>,
    frobenius_sq: f64,
    norm_integral: f64,
}

impl LagCovAccumulator {
    /// Accumulator positioned at `s = 0`, where `A_0 = 0`.
    pub fn new(series_len: usize, dim: usize, lag: usize) -> Self {
        Self { lag, series_len, dim, position: 0, partial: vec![0.0; dim * dim], frobenius_sq: 0.0, norm_integral: 0.0 }
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    /// Current step `s`.
    pub fn position(&self) -> usize {
        self.position
    }

    /// `A_s`, row-major `D × D`.
    pub fn partial_sum(&self) -> &[f64] {
        &self.partial
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.frobenius_sq
    }

    /// `T⁻¹ Σ_{r=0}^{s} ‖A_{r ∧ (T-h)}‖²_F`.
    pub fn norm_integral(&self) -> f64 {
        self.norm_integral
    }

    /// Moves from `s` to `s + 1`.
    pub fn advance(&mut self, series: &CoefficientSeries) {
        debug_assert_eq!(series.len(), self.series_len);
        debug_assert_eq!(series.dim(), self.dim);
        let next = self.position + 1;
        let inv_t = 1.0 / self.series_len as f64;
        if self.lag < self.series_len && next <= self.series_len - self.lag {
            let a = series.row(next - 1);
            let b = series.row(next - 1 + self.lag);
            let mut fsq = 0.0;
            for (row, &ai) in self.partial.chunks_exact_mut(self.dim).zip(a) {
                let scale = ai * inv_t;
                for (p, &bj) in row.iter_mut().zip(b) {
                    *p += scale * bj;
                    fsq += *p * *p;
                }
            }
            self.frobenius_sq = fsq;
        }
        self.position = next;
        self.norm_integral += self.frobenius_sq * inv_t;
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.partial)
    }
}

/// Number of summands of `M̂_h(u)`, i.e. `⌊uT⌋`. Values of `uT` within `1e-9`
/// of an integer are snapped to it so that `u = s/T` always lands on step `s`.
pub(crate) fn step_index(u: f64, series_len: usize) -> usize {
    let x = u * series_len as f64;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        x.floor() as usize
    }
}

/// `M̂_h(u)` as a `D × D` coefficient matrix.
pub fn cum_lag_cov(series: &CoefficientSeries, lag: usize, u: f64) -> Result<DMatrix<f64>> {
    if lag == 0 {
        return Err(Error::invalid("lag must be at least 1"));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::invalid(format!("u = {u} is outside [0, 1]")));
    }
    let t_len = series.len();
    let d = series.dim();
    let terms = step_index(u, t_len).min(t_len.saturating_sub(lag));
    let mut out = DMatrix::zeros(d, d);
    for t in 0..terms {
        let a = series.row(t);
        let b = series.row(t + lag);
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] += a[i] * b[j];
            }
        }
    }
    Ok(out / t_len as f64)
}

/// `‖M̂_h‖_{2,3}` in a single pass, together with the final matrix `M̂_h(1)`.
pub fn lagcov_norm_integral(series: &CoefficientSeries, lag: usize) -> Result<(f64, DMatrix<f64>)> {
    if lag == 0 {
        return Err(Error::invalid("lag must be at least 1"));
    }
    let mut acc = LagCovAccumulator::new(series.len(), series.dim(), lag);
    // s = 0 contributes ‖A_0‖² = 0; the integral runs over s = 0..T-1, and
    // since h >= 1 the partial sum at s = T-1 is already A_{T-h}.
    for _ in 1..series.len() {
        acc.advance(series);
    }
    Ok((acc.norm_integral().sqrt(), acc.to_matrix()))
}

/// Norm `‖M̂_h‖_{2,3}` computed directly on the grid, without a basis.
///
/// Cost is `O(T m²)`; intended for cross-checking the coefficient backend.
pub fn lagcov_norm_integral_grid(series: &FunctionalSeries, lag: usize) -> Result<f64> {
    if lag == 0 {
        return Err(Error::invalid("lag must be at least 1"));
    }
    let t_len = series.len();
    let m = series.grid().len();
    let inv_t = 1.0 / t_len as f64;
    let w2 = 1.0 / (m * m) as f64;
    let mut partial = vec![0.0; m * m];
    let mut fsq = 0.0;
    let mut total = 0.0;
    for s in 1..t_len {
        if lag < t_len && s <= t_len - lag {
            let x = series.curve(s - 1);
            let y = series.curve(s - 1 + lag);
            fsq = 0.0;
            for (row, &xi) in partial.chunks_exact_mut(m).zip(x) {
                for (p, &yj) in row.iter_mut().zip(y) {
                    *p += xi * yj * inv_t;
                    fsq += *p * *p;
                }
            }
            fsq *= w2;
        }
        total += fsq * inv_t;
    }
    Ok(total.sqrt())
}

/// Statistics `S_{h,T} = √T ‖M̂_h‖_{2,3}` for `h = 1..H` and their maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalStats {
    pub per_lag: Vec<f64>,
    pub max_stat: f64,
    pub per_lag_norm: Vec<f64>,
    pub max_lag: usize,
}

impl ClassicalStats {
    pub fn from_norms(norms: Vec<f64>, series_len: usize) -> Self {
        let root_t = (series_len as f64).sqrt();
        let per_lag: Vec<f64> = norms.iter().map(|n| root_t * n).collect();
        let max_stat = per_lag.iter().copied().fold(0.0, f64::max);
        Self { max_lag: norms.len(), per_lag, max_stat, per_lag_norm: norms }
    }

    /// `S̄_{H',T}` for every `H' ≤ H`.
    pub fn running_max(&self) -> Vec<f64> {
        running_max(&self.per_lag)
    }
}

/// Statistics `√T (‖M̂_h‖ - Δ_h) ‖M̂_h‖` for the relevant hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevantStats {
    pub thresholds: Vec<f64>,
    pub per_lag: Vec<f64>,
    pub max_stat: f64,
}

impl RelevantStats {
    pub fn from_norms(norms: &[f64], thresholds: &[f64], series_len: usize) -> Result<Self> {
        validate_thresholds(thresholds, norms.len())?;
        let root_t = (series_len as f64).sqrt();
        let per_lag: Vec<f64> = norms.iter().zip(thresholds).map(|(n, d)| root_t * (n - d) * n).collect();
        let max_stat = per_lag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { thresholds: thresholds.to_vec(), per_lag, max_stat })
    }

    pub fn running_max(&self) -> Vec<f64> {
        running_max(&self.per_lag)
    }
}

pub(crate) fn running_max(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .scan(f64::NEG_INFINITY, |m, &v| {
            *m = m.max(v);
            Some(*m)
        })
        .collect()
}

pub(crate) fn validate_thresholds(thresholds: &[f64], max_lag: usize) -> Result<()> {
    if thresholds.len() != max_lag {
        return Err(Error::invalid(format!("expected {max_lag} thresholds, got {}", thresholds.len())));
    }
    if let Some((h, d)) = thresholds.iter().enumerate().find(|(_, d)| !(d.is_finite() && **d > 0.0)) {
        return Err(Error::invalid(format!("threshold for lag {} must be > 0, got {d}", h + 1)));
    }
    Ok(())
}

pub(crate) fn validate_max_lag(max_lag: usize, series_len: usize) -> Result<()> {
    if max_lag == 0 || max_lag >= series_len {
        return Err(Error::invalid(format!("maximal lag must satisfy 1 <= H < T (H = {max_lag}, T = {series_len})")));
    }
    Ok(())
}

/// Norms `‖M̂_h‖_{2,3}` for `h = 1..=max_lag`.
pub fn lag_norms(series: &CoefficientSeries, max_lag: usize) -> Result<Vec<f64>> {
    (1..=max_lag).map(|h| lagcov_norm_integral(series, h).map(|(n, _)| n)).collect()
}

pub fn stat_classical(series: &CoefficientSeries, max_lag: usize) -> Result<ClassicalStats> {
    validate_max_lag(max_lag, series.len())?;
    Ok(ClassicalStats::from_norms(lag_norms(series, max_lag)?, series.len()))
}

pub fn stat_relevant(series: &CoefficientSeries, max_lag: usize, thresholds: &[f64]) -> Result<RelevantStats> {
    validate_max_lag(max_lag, series.len())?;
    validate_thresholds(thresholds, max_lag)?;
    RelevantStats::from_norms(&lag_norms(series, max_lag)?, thresholds, series.len())
}
