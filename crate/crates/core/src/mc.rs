//! Monte Carlo studies: empirical rejection rates and norm tables.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{default_block_length, run_portmanteau_test, BandwidthChoice, BootstrapConfig};
use crate::error::{Error, Result};
use crate::grid::{project_fourier, FunctionalSeries, Grid1D};
use crate::lagcov::lag_norms;
use crate::seed::{derive_seed, STREAM_BOOT, STREAM_DATA};
use crate::simmodels::{ModelGenerator, ModelId, DEFAULT_BURN_IN};

/// Published reference values of `‖M_h‖_{2,3}`, `h = 1..4`, for the
/// stationary FAR(1) models (T = 2000, D = 101, 10 000 replications).
///
/// The generators here, with kernels normalised to Hilbert-Schmidt norm 0.3,
/// give about half of these at lag 1 (A1: 0.073) and decay like `0.3^h`.
/// Use [`estimate_norm_table`] for thresholds consistent with the simulated
/// models.
pub fn reference_norms(model: ModelId) -> Option<[f64; 4]> {
    match model {
        ModelId::A1 => Some([0.1419, 0.0689, 0.0336, 0.0169]),
        ModelId::A2 => Some([0.0283, 0.0138, 0.0069, 0.0037]),
        ModelId::A3 => Some([0.1996, 0.1220, 0.0755, 0.0468]),
        ModelId::A4 => Some([0.0235, 0.0117, 0.0070, 0.0048]),
        _ => None,
    }
}

/// Thresholds for the relevant hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DeltaPolicy {
    /// `Δ_h` given directly.
    Explicit(Vec<f64>),
    /// `Δ_{h,w} = w ‖M_h‖` for each weight `w`.
    Scaled { weights: Vec<f64>, norms: Vec<f64> },
}

impl DeltaPolicy {
    /// `(weight, thresholds)` pairs for lags `1..=max_lag`.
    pub fn threshold_sets(&self, max_lag: usize) -> Result<Vec<(Option<f64>, Vec<f64>)>> {
        match self {
            DeltaPolicy::Explicit(d) => {
                if d.len() < max_lag {
                    return Err(Error::invalid(format!("need {max_lag} thresholds, got {}", d.len())));
                }
                Ok(vec![(None, d[..max_lag].to_vec())])
            }
            DeltaPolicy::Scaled { weights, norms } => {
                if norms.len() < max_lag {
                    return Err(Error::invalid(format!("norm table covers {} lags, need {max_lag}", norms.len())));
                }
                Ok(weights.iter().map(|&w| (Some(w), norms[..max_lag].iter().map(|n| w * n).collect())).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub model: ModelId,
    pub series_len: usize,
    pub grid_size: usize,
    pub burn_in: usize,
    pub basis_dim: usize,
    pub max_lag: usize,
    pub reps: usize,
    pub replicates: usize,
    /// `None` selects `⌊T^{1/3}⌋`.
    pub block_len: Option<usize>,
    /// `None` selects global centring for stationary models and `⌊T^{2/3}⌋`
    /// for locally stationary ones.
    pub bandwidth: Option<BandwidthChoice>,
    pub alpha: f64,
    pub seed: u64,
    pub delta: Option<DeltaPolicy>,
}

impl McSettings {
    pub fn new(model: ModelId, series_len: usize) -> Self {
        Self {
            model,
            series_len,
            grid_size: 1000,
            burn_in: DEFAULT_BURN_IN,
            basis_dim: crate::grid::DEFAULT_BASIS_DIM,
            max_lag: 4,
            reps: 1000,
            replicates: crate::bootstrap::DEFAULT_REPLICATES,
            block_len: None,
            bandwidth: None,
            alpha: crate::bootstrap::DEFAULT_ALPHA,
            seed: 0,
            delta: None,
        }
    }

    pub fn bandwidth_choice(&self) -> BandwidthChoice {
        self.bandwidth.unwrap_or(if self.model.is_locally_stationary() {
            BandwidthChoice::Auto
        } else {
            BandwidthChoice::Global
        })
    }

    fn bootstrap_config(&self, seed: u64) -> Result<BootstrapConfig> {
        Ok(BootstrapConfig {
            replicates: self.replicates,
            block_len: self.block_len.unwrap_or_else(|| default_block_length(self.series_len)),
            bandwidth: self.bandwidth_choice().resolve(self.series_len)?,
            alpha: self.alpha,
            seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    Classical,
    Relevant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub hypothesis: Hypothesis,
    /// Weight `w` of `Δ_{h,w} = w ‖M_h‖`, when thresholds were scaled.
    pub weight: Option<f64>,
    pub max_lag: usize,
    pub rejections: usize,
    /// Rejection rate in percent.
    pub rate: f64,
    /// Monte Carlo standard error of the rate, in percent.
    pub std_error: f64,
}

impl McRow {
    fn new(hypothesis: Hypothesis, weight: Option<f64>, max_lag: usize, rejections: usize, reps: usize) -> Self {
        let p = rejections as f64 / reps as f64;
        Self {
            hypothesis,
            weight,
            max_lag,
            rejections,
            rate: 100.0 * p,
            std_error: 100.0 * (p * (1.0 - p) / reps as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub model: ModelId,
    pub series_len: usize,
    pub grid_size: usize,
    pub basis_dim: usize,
    pub replicates: usize,
    pub bandwidth: String,
    pub block_len: usize,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
    pub rows: Vec<McRow>,
}

impl McReport {
    pub fn classical_rate(&self, max_lag: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.hypothesis == Hypothesis::Classical && r.max_lag == max_lag).map(|r| r.rate)
    }

    pub fn relevant_rate(&self, weight: f64, max_lag: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.hypothesis == Hypothesis::Relevant && r.max_lag == max_lag && r.weight == Some(weight))
            .map(|r| r.rate)
    }
}

struct RepOutcome {
    classical: Vec<bool>,
    relevant: Vec<Vec<bool>>,
}

/// Rejection rates of the classical (and, with a [`DeltaPolicy`], relevant)
/// tests for `H = 1..=max_lag` over `reps` independent simulations.
///
/// Repetition `r` draws its data from substream `r` of the data stream and
/// its bootstrap multipliers from substream `r` of the bootstrap stream, so
/// the report does not depend on the size of the worker pool.
pub fn mc_rejection_rates(settings: &McSettings) -> Result<McReport> {
    if settings.reps == 0 {
        return Err(Error::invalid("number of repetitions must be at least 1"));
    }
    let t_len = settings.series_len;
    let grid = Grid1D::new(settings.grid_size)?;
    let generator = ModelGenerator::new(settings.model, t_len, grid, settings.burn_in)?;
    let probe_cfg = settings.bootstrap_config(0)?;
    probe_cfg.validate(t_len)?;
    for w in probe_cfg.block_condition_warnings(t_len) {
        warn!("{w}");
    }
    let threshold_sets =
        settings.delta.as_ref().map(|d| d.threshold_sets(settings.max_lag)).transpose()?.unwrap_or_default();
    if !threshold_sets.is_empty() && settings.alpha >= 0.5 {
        return Err(Error::invalid("the relevant test requires alpha < 1/2"));
    }

    let outcomes: Vec<RepOutcome> = (0..settings.reps)
        .into_par_iter()
        .map(|r| -> Result<RepOutcome> {
            let data = generator.generate(derive_seed(settings.seed, STREAM_DATA, r as u64))?;
            let coef = project_fourier(&data, settings.basis_dim)?;
            let cfg = settings.bootstrap_config(derive_seed(settings.seed, STREAM_BOOT, r as u64))?;
            let res = run_portmanteau_test(&coef, settings.max_lag, &cfg)?;
            let classical = res.p_classical.iter().map(|&p| p < settings.alpha).collect();
            let relevant = threshold_sets
                .iter()
                .map(|(_, d)| res.relevant_p_values(d).map(|ps| ps.iter().map(|&p| p < settings.alpha).collect()))
                .collect::<Result<_>>()?;
            Ok(RepOutcome { classical, relevant })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for h in 0..settings.max_lag {
        let hits = outcomes.iter().filter(|o| o.classical[h]).count();
        rows.push(McRow::new(Hypothesis::Classical, None, h + 1, hits, settings.reps));
    }
    for (set, (weight, _)) in threshold_sets.iter().enumerate() {
        for h in 0..settings.max_lag {
            let hits = outcomes.iter().filter(|o| o.relevant[set][h]).count();
            rows.push(McRow::new(Hypothesis::Relevant, *weight, h + 1, hits, settings.reps));
        }
    }
    Ok(McReport {
        model: settings.model,
        series_len: t_len,
        grid_size: settings.grid_size,
        basis_dim: settings.basis_dim,
        replicates: settings.replicates,
        bandwidth: probe_cfg.bandwidth.to_string(),
        block_len: probe_cfg.block_len,
        alpha: settings.alpha,
        reps: settings.reps,
        seed: settings.seed,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub lag: usize,
    pub mean: f64,
    pub variance: f64,
}

/// Monte Carlo mean and variance of `‖M̂_h‖_{2,3}` for `h = 1..=max_lag`,
/// with repetition `r` generated by `generate(seed_r)`.
pub fn estimate_norm_table_with<F>(
    generate: F,
    basis_dim: usize,
    max_lag: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<NormRow>>
where
    F: Fn(u64) -> Result<FunctionalSeries> + Sync,
{
    if reps == 0 {
        return Err(Error::invalid("number of repetitions must be at least 1"));
    }
    if max_lag == 0 {
        return Err(Error::invalid("maximal lag must be at least 1"));
    }
    let norms: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let data = generate(derive_seed(seed, STREAM_DATA, r as u64))?;
            let coef = project_fourier(&data, basis_dim)?;
            lag_norms(&coef, max_lag)
        })
        .collect::<Result<_>>()?;
    Ok((0..max_lag)
        .map(|h| {
            let n = reps as f64;
            let mean = norms.iter().map(|v| v[h]).sum::<f64>() / n;
            let variance =
                if reps > 1 { norms.iter().map(|v| (v[h] - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            NormRow { lag: h + 1, mean, variance }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSettings {
    pub model: ModelId,
    pub series_len: usize,
    pub grid_size: usize,
    pub burn_in: usize,
    pub basis_dim: usize,
    pub max_lag: usize,
    pub reps: usize,
    pub seed: u64,
}

pub fn estimate_norm_table(settings: &NormSettings) -> Result<Vec<NormRow>> {
    let grid = Grid1D::new(settings.grid_size)?;
    let generator = ModelGenerator::new(settings.model, settings.series_len, grid, settings.burn_in)?;
    estimate_norm_table_with(
        |s| generator.generate(s),
        settings.basis_dim,
        settings.max_lag,
        settings.reps,
        settings.seed,
    )
}
