//! Multiplier block bootstrap for the portmanteau statistics.
//!
//! A replicate multiplies centred block sums
//! `C_{i,h} = Σ_{t=i}^{(i+m-1) ∧ (T-h)} (a_t a_{t+h}ᵀ - μ̂_{t,h,n})`
//! by i.i.d. standard normal weights `R_i`, and accumulates them into the step
//! process `B̂_h(u) = T^{-1/2} Σ_{i ≤ ⌊uT⌋ ∧ (T-h)} R_i m^{-1/2} C_{i,h}`.
//! Two quantities per lag enter the tests: the norm `‖B̂_h‖_{2,3}` (classical
//! hypotheses) and the inner product `⟨M̂_h, B̂_h⟩` (relevant hypotheses).
//!
//! [`bootstrap_replicate`] evaluates one replicate with sliding windows in
//! `O(T D²)` time per lag. [`BootstrapEngine`] evaluates many replicates at
//! once: since both quantities are quadratic (resp. linear) in the multipliers,
//! it precomputes the Gram matrix `⟨C_i, C_j⟩` from the Gram matrix of the
//! coefficient rows, after which every replicate costs `O(T²)` per lag in a
//! single matrix product.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::CoefficientSeries;
use crate::lagcov::{lag_norms, running_max, validate_max_lag, validate_thresholds, ClassicalStats, RelevantStats};
use crate::seed::{substream, STREAM_MULTIPLIER};

/// Default number of bootstrap replicates.
pub const DEFAULT_REPLICATES: usize = 200;
/// Default significance level.
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Series longer than this are bootstrapped replicate by replicate instead of
/// through a `T × T` Gram matrix.
pub const GRAM_MAX_LEN: usize = 4096;

/// Largest `k` with `k^3 <= x`.
fn integer_cbrt(x: u128) -> u128 {
    let mut k = (x as f64).cbrt() as u128;
    while k * k * k > x {
        k -= 1;
    }
    while (k + 1) * (k + 1) * (k + 1) <= x {
        k += 1;
    }
    k
}

/// Block length `max(1, ⌊T^{1/3}⌋)`.
pub fn default_block_length(series_len: usize) -> usize {
    (integer_cbrt(series_len as u128) as usize).max(1)
}

/// Local centring bandwidth `max(1, ⌊T^{2/3}⌋)`.
pub fn local_bandwidth(series_len: usize) -> usize {
    let t = series_len as u128;
    (integer_cbrt(t * t) as usize).max(1)
}

/// Half-width of the window used to centre the lagged products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    /// `n = T`: centre with the global product moment. Valid when the
    /// second-order structure is stationary.
    Global,
    /// Centre with a local average over `t - n ..= t + n`.
    Window(usize),
}

impl Bandwidth {
    pub fn local_default(series_len: usize) -> Self {
        Bandwidth::Window(local_bandwidth(series_len))
    }

    pub fn resolve(self, series_len: usize) -> usize {
        match self {
            Bandwidth::Global => series_len,
            Bandwidth::Window(n) => n,
        }
    }
}

impl std::fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bandwidth::Global => write!(f, "global"),
            Bandwidth::Window(n) => write!(f, "{n}"),
        }
    }
}

/// User-facing bandwidth selection, resolved once `T` is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthChoice {
    Global,
    /// `n = ⌊T^{2/3}⌋`.
    Auto,
    Fixed(usize),
}

impl BandwidthChoice {
    pub fn resolve(self, series_len: usize) -> Result<Bandwidth> {
        match self {
            BandwidthChoice::Global => Ok(Bandwidth::Global),
            BandwidthChoice::Auto => Ok(Bandwidth::local_default(series_len)),
            BandwidthChoice::Fixed(0) => Err(Error::invalid("bandwidth must be at least 1")),
            BandwidthChoice::Fixed(n) => Ok(Bandwidth::Window(n)),
        }
    }
}

impl std::str::FromStr for BandwidthChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(BandwidthChoice::Global),
            "auto" => Ok(BandwidthChoice::Auto),
            _ => s.parse::<usize>().ok().filter(|&n| n > 0).map(BandwidthChoice::Fixed).ok_or_else(|| {
                Error::invalid(format!("invalid bandwidth {s:?}; use global, auto or a positive integer"))
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub block_len: usize,
    pub bandwidth: Bandwidth,
    pub alpha: f64,
    pub seed: u64,
}

impl BootstrapConfig {
    /// Defaults for a series of length `series_len`: 200 replicates,
    /// `m = ⌊T^{1/3}⌋`, global centring, `α = 5%`, seed 0.
    pub fn for_length(series_len: usize) -> Self {
        Self {
            replicates: DEFAULT_REPLICATES,
            block_len: default_block_length(series_len),
            bandwidth: Bandwidth::Global,
            alpha: DEFAULT_ALPHA,
            seed: 0,
        }
    }

    pub fn validate(&self, series_len: usize) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::invalid("number of bootstrap replicates must be positive"));
        }
        validate_block(self.block_len, series_len)?;
        if let Bandwidth::Window(n) = self.bandwidth {
            if n == 0 || n > series_len {
                return Err(Error::invalid(format!("bandwidth must satisfy 1 <= n <= T (n = {n}, T = {series_len})")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    /// Checks `m < n < T` when local centring is used; the asymptotics need
    /// `m/n → 0` and `m n² = o(T²)`.
    pub fn block_condition_warnings(&self, series_len: usize) -> Vec<String> {
        let mut out = Vec::new();
        if let Bandwidth::Window(n) = self.bandwidth {
            if !(self.block_len < n && n < series_len) {
                out.push(format!(
                    "block length m = {} and bandwidth n = {n} do not satisfy m < n < T = {series_len}",
                    self.block_len
                ));
            }
        }
        out
    }
}

fn validate_block(block_len: usize, series_len: usize) -> Result<()> {
    if block_len == 0 || block_len > series_len {
        return Err(Error::invalid(format!(
            "block length must satisfy 1 <= m <= T (m = {block_len}, T = {series_len})"
        )));
    }
    Ok(())
}

/// Index window `lo..=hi` (0-based) of the local product moment at 0-based
/// time `t`, for `n_products = T - h` lagged products.
#[inline]
fn centring_window(t: usize, half_width: usize, n_products: usize) -> (usize, usize) {
    (t.saturating_sub(half_width), (t + half_width).min(n_products - 1))
}

fn add_outer(acc: &mut [f64], a: &[f64], b: &[f64], scale: f64) {
    for (row, &ai) in acc.chunks_exact_mut(b.len()).zip(a) {
        let s = ai * scale;
        for (p, &bj) in row.iter_mut().zip(b) {
            *p += s * bj;
        }
    }
}

/// Local empirical product moment `μ̂_{t,h,n,T}` at the 1-based time `t`.
pub fn local_product_moment(
    series: &CoefficientSeries,
    lag: usize,
    bandwidth: Bandwidth,
    t: usize,
) -> Result<DMatrix<f64>> {
    let t_len = series.len();
    if lag == 0 || lag >= t_len {
        return Err(Error::invalid(format!("lag must satisfy 1 <= h < T (h = {lag}, T = {t_len})")));
    }
    if t == 0 || t > t_len - lag {
        return Err(Error::invalid(format!("time index must satisfy 1 <= t <= T - h, got {t}")));
    }
    let n = bandwidth.resolve(t_len);
    if n == 0 {
        return Err(Error::invalid("bandwidth must be positive"));
    }
    let d = series.dim();
    let (lo, hi) = centring_window(t - 1, n, t_len - lag);
    let mut acc = vec![0.0; d * d];
    for j in lo..=hi {
        add_outer(&mut acc, series.row(j), series.row(j + lag), 1.0);
    }
    let count = (hi - lo + 1) as f64;
    Ok(DMatrix::from_row_slice(d, d, &acc) / count)
}

/// Norm and inner product of one bootstrap process `B̂_h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateLag {
    /// `‖B̂_h‖_{2,3}`.
    pub norm: f64,
    /// `⟨M̂_h, B̂_h⟩`.
    pub inner: f64,
}

/// One bootstrap replicate for lags `1..=max_lag`, driven by the given
/// multipliers (only the first `T - h` are used at lag `h`).
pub fn bootstrap_replicate(
    series: &CoefficientSeries,
    max_lag: usize,
    cfg: &BootstrapConfig,
    multipliers: &[f64],
) -> Result<Vec<ReplicateLag>> {
    let t_len = series.len();
    validate_block(cfg.block_len, t_len)?;
    if multipliers.len() < t_len {
        return Err(Error::invalid(format!("need at least T = {t_len} multipliers, got {}", multipliers.len())));
    }
    let n = cfg.bandwidth.resolve(t_len);
    if n == 0 {
        return Err(Error::invalid("bandwidth must be positive"));
    }
    Ok((1..=max_lag).map(|h| replicate_lag(series, h, n, cfg.block_len, multipliers)).collect())
}

/// Sliding-window evaluation of one lag of one replicate.
fn replicate_lag(series: &CoefficientSeries, lag: usize, n: usize, m: usize, mult: &[f64]) -> ReplicateLag {
    let t_len = series.len();
    if lag >= t_len {
        return ReplicateLag { norm: 0.0, inner: 0.0 };
    }
    let d = series.dim();
    let dd = d * d;
    let np = t_len - lag;
    let inv_t = 1.0 / t_len as f64;
    let weight_scale = 1.0 / ((m * t_len) as f64).sqrt();
    let product = |t: usize, out: &mut [f64]| {
        out.fill(0.0);
        add_outer(out, series.row(t), series.row(t + lag), 1.0);
    };

    // Window sum of products for the centring at time `t`, maintained as the
    // window slides; centred products Y_t are produced in order and the last
    // `m` of them are kept to slide the block sums C_i.
    let mut scratch = vec![0.0; dd];
    let mut win_sum = vec![0.0; dd];
    let (mut win_lo, mut win_hi) = centring_window(0, n, np);
    for j in win_lo..=win_hi {
        product(j, &mut scratch);
        win_sum.iter_mut().zip(&scratch).for_each(|(w, p)| *w += p);
    }
    let mut centred: Vec<Vec<f64>> = Vec::with_capacity(np);
    let mut next_centred = 0usize;
    let mut produce = |centred: &mut Vec<Vec<f64>>, t: usize| {
        let (lo, hi) = centring_window(t, n, np);
        while win_hi < hi {
            win_hi += 1;
            product(win_hi, &mut scratch);
            win_sum.iter_mut().zip(&scratch).for_each(|(w, p)| *w += p);
        }
        while win_lo < lo {
            product(win_lo, &mut scratch);
            win_sum.iter_mut().zip(&scratch).for_each(|(w, p)| *w -= p);
            win_lo += 1;
        }
        let count = (hi - lo + 1) as f64;
        let mut y = vec![0.0; dd];
        product(t, &mut y);
        y.iter_mut().zip(&win_sum).for_each(|(v, w)| *v -= w / count);
        if centred.len() > m {
            // only Y_{i-1} .. Y_{i+m-1} are ever needed
            let old = t - (m + 1);
            centred[old] = Vec::new();
        }
        centred.push(y);
    };

    let mut block = vec![0.0; dd];
    for t in 0..m.min(np) {
        produce(&mut centred, t);
        next_centred += 1;
        block.iter_mut().zip(&centred[t]).for_each(|(c, y)| *c += y);
    }

    let mut boot = vec![0.0; dd];
    let mut mhat = vec![0.0; dd];
    let mut norm_sq = 0.0;
    let mut inner = 0.0;
    for i in 0..np {
        if i > 0 {
            // C_i = C_{i-1} - Y_{i-1} + Y_{i+m-1}
            block.iter_mut().zip(&centred[i - 1]).for_each(|(c, y)| *c -= y);
            if i + m - 1 < np {
                produce(&mut centred, next_centred);
                next_centred += 1;
                block.iter_mut().zip(&centred[i + m - 1]).for_each(|(c, y)| *c += y);
            }
        }
        let w = mult[i] * weight_scale;
        boot.iter_mut().zip(&block).for_each(|(b, c)| *b += w * c);
        add_outer(&mut mhat, series.row(i), series.row(i + lag), inv_t);
        // B_r for r = i + 1 covers s = r, and s = r..T-1 when r = T - h.
        let weight = if i + 1 == np { (t_len - np) as f64 } else { 1.0 };
        norm_sq += weight * boot.iter().map(|b| b * b).sum::<f64>();
        inner += weight * boot.iter().zip(&mhat).map(|(b, a)| b * a).sum::<f64>();
    }
    ReplicateLag { norm: (norm_sq * inv_t).max(0.0).sqrt(), inner: inner * inv_t }
}

/// Applies `Λ = E (I - A)` to `x` in place, where `A` averages over the
/// centring windows and `E` sums over the blocks `i..i+m`.
fn apply_centred_block_sum(x: &mut [f64], n: usize, m: usize, prefix: &mut Vec<f64>) {
    let np = x.len();
    prefix.clear();
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in x.iter() {
        acc += v;
        prefix.push(acc);
    }
    for (t, v) in x.iter_mut().enumerate() {
        let (lo, hi) = centring_window(t, n, np);
        *v -= (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1) as f64;
    }
    prefix.clear();
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in x.iter() {
        acc += v;
        prefix.push(acc);
    }
    for (i, v) in x.iter_mut().enumerate() {
        *v = prefix[(i + m).min(np)] - prefix[i];
    }
}

/// The bootstrap process `B̂_h` of one replicate as a step function in `u`:
/// entry `s` is its value on `[s/T, (s+1)/T)` as a `D × D` coefficient
/// matrix.
pub fn bootstrap_path(
    series: &CoefficientSeries,
    lag: usize,
    cfg: &BootstrapConfig,
    multipliers: &[f64],
) -> Result<Vec<DMatrix<f64>>> {
    let t_len = series.len();
    validate_max_lag(lag, t_len)?;
    validate_block(cfg.block_len, t_len)?;
    if multipliers.len() < t_len {
        return Err(Error::invalid(format!("need at least T = {t_len} multipliers, got {}", multipliers.len())));
    }
    let n = cfg.bandwidth.resolve(t_len);
    if n == 0 {
        return Err(Error::invalid("bandwidth must be positive"));
    }
    let d = series.dim();
    let np = t_len - lag;
    let scale = 1.0 / ((cfg.block_len * t_len) as f64).sqrt();
    // blocks[i] holds C_i entrywise
    let mut blocks = vec![DMatrix::zeros(d, d); np];
    let mut x = vec![0.0; np];
    let mut prefix = Vec::with_capacity(np + 1);
    for a in 0..d {
        for b in 0..d {
            for (t, v) in x.iter_mut().enumerate() {
                *v = series.row(t)[a] * series.row(t + lag)[b];
            }
            apply_centred_block_sum(&mut x, n, cfg.block_len, &mut prefix);
            for (c, v) in blocks.iter_mut().zip(&x) {
                c[(a, b)] = *v;
            }
        }
    }
    let mut path = Vec::with_capacity(t_len);
    let mut acc = DMatrix::zeros(d, d);
    // on [s/T, (s+1)/T) the sum runs over the 1-based blocks i <= s ∧ (T-h)
    for s in 0..t_len {
        path.push(acc.clone());
        if s < np {
            acc += &blocks[s] * (multipliers[s] * scale);
        }
    }
    Ok(path)
}

#[derive(Debug, Clone)]
enum LagKernel {
    /// Quadratic form for `‖B̂_h‖²` and linear form for `⟨M̂_h, B̂_h⟩` in the
    /// first `T - h` multipliers.
    Gram {
        quad: DMatrix<f64>,
        lin: DVector<f64>,
    },
    Direct,
}

/// Precomputed bootstrap state for one series, reused across replicates.
#[derive(Debug, Clone)]
pub struct BootstrapEngine {
    series: CoefficientSeries,
    half_width: usize,
    block_len: usize,
    lags: Vec<LagKernel>,
}

impl BootstrapEngine {
    pub fn new(series: &CoefficientSeries, max_lag: usize, block_len: usize, bandwidth: Bandwidth) -> Result<Self> {
        let t_len = series.len();
        validate_max_lag(max_lag, t_len)?;
        validate_block(block_len, t_len)?;
        let n = bandwidth.resolve(t_len);
        if n == 0 {
            return Err(Error::invalid("bandwidth must be positive"));
        }
        let lags = if t_len <= GRAM_MAX_LEN {
            let x = DMatrix::from_row_slice(t_len, series.dim(), series.as_slice());
            let gram = &x * x.transpose();
            (1..=max_lag).map(|h| Self::gram_kernel(&gram, t_len, h, n, block_len)).collect()
        } else {
            vec![LagKernel::Direct; max_lag]
        };
        Ok(Self { series: series.clone(), half_width: n, block_len, lags })
    }

    fn gram_kernel(gram: &DMatrix<f64>, t_len: usize, lag: usize, n: usize, m: usize) -> LagKernel {
        let np = t_len - lag;
        // ⟨P_j, P_k⟩ = (a_j·a_k)(a_{j+h}·a_{k+h})
        let mut f = DMatrix::from_fn(np, np, |j, k| gram[(j, k)] * gram[(j + lag, k + lag)]);
        let mut prefix = Vec::with_capacity(np + 1);
        // F = Λ PG, so F[(i, t)] = ⟨C_i, P_t⟩ since PG is symmetric.
        for mut col in f.column_iter_mut() {
            apply_centred_block_sum(col.as_mut_slice(), n, m, &mut prefix);
        }
        // G = Λ Fᵀ, G[(i, j)] = ⟨C_i, C_j⟩
        let mut g = f.transpose();
        for mut col in g.column_iter_mut() {
            apply_centred_block_sum(col.as_mut_slice(), n, m, &mut prefix);
        }
        let t = t_len as f64;
        let tail = |k: usize| (t_len - 1 - k) as f64;
        let quad_scale = 1.0 / (m as f64 * t * t);
        let quad = DMatrix::from_fn(np, np, |i, j| 0.5 * (g[(i, j)] + g[(j, i)]) * tail(i.max(j)) * quad_scale);
        let lin_scale = 1.0 / (t * t * (m as f64 * t).sqrt());
        let lin = DVector::from_fn(np, |i, _| (0..np).map(|tt| f[(i, tt)] * tail(i.max(tt))).sum::<f64>() * lin_scale);
        LagKernel::Gram { quad, lin }
    }

    pub fn max_lag(&self) -> usize {
        self.lags.len()
    }

    /// Evaluates the replicates whose multipliers are the columns of
    /// `multipliers` (`T × K`). Returns `[k][h-1]` norms and inner products.
    pub fn evaluate(&self, multipliers: &DMatrix<f64>) -> Vec<Vec<ReplicateLag>> {
        let t_len = self.series.len();
        assert_eq!(multipliers.nrows(), t_len, "multiplier matrix must have T rows");
        let k = multipliers.ncols();
        let mut out = vec![Vec::with_capacity(self.lags.len()); k];
        for (idx, kernel) in self.lags.iter().enumerate() {
            let lag = idx + 1;
            match kernel {
                LagKernel::Gram { quad, lin } => {
                    let np = t_len - lag;
                    let r = multipliers.rows(0, np);
                    let qr = quad * r;
                    for (c, row) in out.iter_mut().enumerate() {
                        let rc = r.column(c);
                        let norm_sq = rc.dot(&qr.column(c));
                        row.push(ReplicateLag { norm: norm_sq.max(0.0).sqrt(), inner: rc.dot(lin) });
                    }
                }
                LagKernel::Direct => {
                    for (c, row) in out.iter_mut().enumerate() {
                        let col: Vec<f64> = multipliers.column(c).iter().copied().collect();
                        row.push(replicate_lag(&self.series, lag, self.half_width, self.block_len, &col));
                    }
                }
            }
        }
        out
    }
}

/// `T × K` matrix of standard normal multipliers; column `k` is drawn from
/// substream `k` of `seed`.
pub fn draw_multipliers(series_len: usize, replicates: usize, seed: u64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(series_len, replicates);
    for (k, mut col) in out.column_iter_mut().enumerate() {
        let mut rng = substream(seed, STREAM_MULTIPLIER, k as u64);
        for v in col.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    }
    out
}

/// Fraction of replicate statistics that reach the observed value.
pub fn bootstrap_p_value(observed: f64, replicates: &[f64]) -> f64 {
    let hits = replicates.iter().filter(|&&b| b >= observed).count();
    hits as f64 / replicates.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Classical,
    Relevant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestMeta {
    pub series_len: usize,
    pub basis_dim: usize,
    pub max_lag: usize,
    pub block_len: usize,
    pub bandwidth: Bandwidth,
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub kind: TestKind,
    pub classical: ClassicalStats,
    pub relevant: Option<RelevantStats>,
    /// `‖B̂_h^{(k)}‖_{2,3}`, indexed `[k][h-1]`.
    pub boot_norms: Vec<Vec<f64>>,
    /// `⟨M̂_h, B̂_h^{(k)}⟩`, indexed `[k][h-1]`.
    pub boot_inners: Vec<Vec<f64>>,
    /// p-value of the classical test of `H̄_0^{(H')}` for `H' = 1..=H`.
    pub p_classical: Vec<f64>,
    /// p-value of the relevant test of `H̄_0^{(H',Δ)}` for `H' = 1..=H`.
    pub p_relevant: Option<Vec<f64>>,
    pub reject: bool,
    pub meta: TestMeta,
}

impl TestResult {
    /// p-value of the test for the full maximal lag `H`.
    pub fn p_value(&self) -> f64 {
        match self.kind {
            TestKind::Classical => *self.p_classical.last().expect("H >= 1"),
            TestKind::Relevant => {
                *self.p_relevant.as_ref().and_then(|p| p.last()).expect("relevant result carries p-values")
            }
        }
    }

    /// Relevant-test p-values for other thresholds, reusing the stored
    /// replicates.
    pub fn relevant_p_values(&self, thresholds: &[f64]) -> Result<Vec<f64>> {
        let stats = RelevantStats::from_norms(&self.classical.per_lag_norm, thresholds, self.meta.series_len)?;
        Ok(relevant_p_values(&stats, &self.boot_inners))
    }
}

fn classical_p_values(stats: &ClassicalStats, boot_norms: &[Vec<f64>]) -> Vec<f64> {
    let observed = stats.running_max();
    let maxima: Vec<Vec<f64>> = boot_norms.iter().map(|r| running_max(r)).collect();
    (0..stats.max_lag)
        .map(|h| {
            let column: Vec<f64> = maxima.iter().map(|r| r[h]).collect();
            bootstrap_p_value(observed[h], &column)
        })
        .collect()
}

fn relevant_p_values(stats: &RelevantStats, boot_inners: &[Vec<f64>]) -> Vec<f64> {
    let observed = stats.running_max();
    let maxima: Vec<Vec<f64>> = boot_inners.iter().map(|r| running_max(r)).collect();
    (0..observed.len())
        .map(|h| {
            let column: Vec<f64> = maxima.iter().map(|r| r[h]).collect();
            bootstrap_p_value(observed[h], &column)
        })
        .collect()
}

fn run_tests(
    series: &CoefficientSeries,
    max_lag: usize,
    thresholds: Option<&[f64]>,
    cfg: &BootstrapConfig,
) -> Result<TestResult> {
    let t_len = series.len();
    validate_max_lag(max_lag, t_len)?;
    cfg.validate(t_len)?;
    if let Some(d) = thresholds {
        validate_thresholds(d, max_lag)?;
        if cfg.alpha >= 0.5 {
            return Err(Error::invalid("the relevant test requires alpha < 1/2"));
        }
    }

    let classical = ClassicalStats::from_norms(lag_norms(series, max_lag)?, t_len);
    let relevant = thresholds.map(|d| RelevantStats::from_norms(&classical.per_lag_norm, d, t_len)).transpose()?;

    let engine = BootstrapEngine::new(series, max_lag, cfg.block_len, cfg.bandwidth)?;
    let multipliers = draw_multipliers(t_len, cfg.replicates, cfg.seed);
    let reps = engine.evaluate(&multipliers);
    let boot_norms: Vec<Vec<f64>> = reps.iter().map(|r| r.iter().map(|x| x.norm).collect()).collect();
    let boot_inners: Vec<Vec<f64>> = reps.iter().map(|r| r.iter().map(|x| x.inner).collect()).collect();

    // The replicate norms estimate ‖B_h‖, which lives on the scale of
    // √T ‖M̂_h‖, so they are compared against S̄_{H,T} directly.
    let p_classical = classical_p_values(&classical, &boot_norms);
    let p_relevant = relevant.as_ref().map(|r| relevant_p_values(r, &boot_inners));

    let kind = if thresholds.is_some() { TestKind::Relevant } else { TestKind::Classical };
    let p = match kind {
        TestKind::Classical => p_classical[max_lag - 1],
        TestKind::Relevant => p_relevant.as_ref().expect("thresholds given")[max_lag - 1],
    };
    Ok(TestResult {
        kind,
        classical,
        relevant,
        boot_norms,
        boot_inners,
        p_classical,
        p_relevant,
        reject: p < cfg.alpha,
        meta: TestMeta {
            series_len: t_len,
            basis_dim: series.dim(),
            max_lag,
            block_len: cfg.block_len,
            bandwidth: cfg.bandwidth,
            replicates: cfg.replicates,
            alpha: cfg.alpha,
            seed: cfg.seed,
        },
    })
}

/// Bootstrap test of `H̄_0^{(H)}`: no serial correlation up to lag `H`.
pub fn run_portmanteau_test(series: &CoefficientSeries, max_lag: usize, cfg: &BootstrapConfig) -> Result<TestResult> {
    run_tests(series, max_lag, None, cfg)
}

/// Bootstrap test of `H̄_0^{(H,Δ)}`: `‖M_h‖_{2,3} <= Δ_h` for all `h <= H`.
pub fn run_relevant_test(
    series: &CoefficientSeries,
    max_lag: usize,
    thresholds: &[f64],
    cfg: &BootstrapConfig,
) -> Result<TestResult> {
    run_tests(series, max_lag, Some(thresholds), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_series(t_len: usize, dim: usize, seed: u64) -> CoefficientSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..t_len * dim).map(|_| rng.sample(StandardNormal)).collect();
        CoefficientSeries::new(v, t_len, dim).unwrap()
    }

    fn constant_ones(t_len: usize, dim: usize) -> CoefficientSeries {
        let mut v = vec![0.0; t_len * dim];
        for t in 0..t_len {
            v[t * dim] = 1.0;
        }
        CoefficientSeries::new(v, t_len, dim).unwrap()
    }

    #[test]
    fn block_length_rule() {
        assert_eq!(default_block_length(128), 5);
        assert_eq!(default_block_length(1024), 10);
        assert_eq!(default_block_length(1), 1);
        assert_eq!(default_block_length(1000), 10);
        assert_eq!(default_block_length(999), 9);
        assert_eq!(local_bandwidth(256), 40);
        assert_eq!(local_bandwidth(1000), 100);
        for t in 1..3000 {
            assert!(default_block_length(t) <= t);
        }
    }

    #[test]
    fn global_window_gives_global_mean() {
        let s = random_series(9, 3, 1);
        let h = 2;
        let np = 7;
        let mut global = DMatrix::zeros(3, 3);
        for t in 0..np {
            let a = DVector::from_row_slice(s.row(t));
            let b = DVector::from_row_slice(s.row(t + h));
            global += a * b.transpose();
        }
        global /= np as f64;
        let first = local_product_moment(&s, h, Bandwidth::Global, 1).unwrap();
        for t in 1..=np {
            let mu = local_product_moment(&s, h, Bandwidth::Global, t).unwrap();
            assert_eq!(mu, first, "window degeneracy at t = {t}");
            assert!((mu - &global).abs().max() < 1e-14);
        }
    }

    #[test]
    fn local_window_by_hand() {
        let s = random_series(5, 2, 3);
        let mu = local_product_moment(&s, 1, Bandwidth::Window(1), 3).unwrap();
        let outer = |t: usize| DVector::from_row_slice(s.row(t - 1)) * DVector::from_row_slice(s.row(t)).transpose();
        let expected = (outer(2) + outer(3) + outer(4)) / 3.0;
        assert!((mu - expected).abs().max() < 1e-14);

        let ones = constant_ones(6, 3);
        for t in 1..=5 {
            let mu = local_product_moment(&ones, 1, Bandwidth::Window(2), t).unwrap();
            assert_eq!(mu[(0, 0)], 1.0);
            assert_eq!(mu.iter().filter(|&&v| v != 0.0).count(), 1);
        }
    }

    #[test]
    fn local_moment_index_errors() {
        let s = random_series(5, 2, 3);
        assert!(local_product_moment(&s, 1, Bandwidth::Global, 0).is_err());
        assert!(local_product_moment(&s, 1, Bandwidth::Global, 5).is_err());
        assert!(local_product_moment(&s, 5, Bandwidth::Global, 1).is_err());
    }

    #[test]
    fn zero_multipliers_and_constant_products() {
        let s = random_series(12, 3, 5);
        let cfg = BootstrapConfig { block_len: 3, ..BootstrapConfig::for_length(12) };
        let out = bootstrap_replicate(&s, 3, &cfg, &[0.0; 12]).unwrap();
        assert!(out.iter().all(|r| r.norm == 0.0 && r.inner == 0.0));

        let ones = constant_ones(12, 3);
        let mult: Vec<f64> = (0..12).map(|i| (i as f64).sin() + 0.3).collect();
        let out = bootstrap_replicate(&ones, 3, &cfg, &mult).unwrap();
        assert!(out.iter().all(|r| r.norm == 0.0 && r.inner == 0.0), "{out:?}");
    }

    #[test]
    fn replicate_argument_errors() {
        let s = random_series(6, 2, 5);
        let mut cfg = BootstrapConfig::for_length(6);
        assert!(bootstrap_replicate(&s, 1, &cfg, &[1.0; 5]).is_err());
        cfg.block_len = 7;
        assert!(bootstrap_replicate(&s, 1, &cfg, &[1.0; 6]).is_err());
        cfg.block_len = 0;
        assert!(bootstrap_replicate(&s, 1, &cfg, &[1.0; 6]).is_err());
    }

    #[test]
    fn engine_matches_sliding_window() {
        for (t_len, dim, m, bw) in [
            (25, 3, 4, Bandwidth::Global),
            (25, 3, 4, Bandwidth::Window(6)),
            (40, 5, 1, Bandwidth::Window(1)),
            (17, 2, 17, Bandwidth::Window(3)),
        ] {
            let s = random_series(t_len, dim, t_len as u64);
            let engine = BootstrapEngine::new(&s, 4, m, bw).unwrap();
            let mult = draw_multipliers(t_len, 5, 11);
            let batched = engine.evaluate(&mult);
            let cfg = BootstrapConfig { block_len: m, bandwidth: bw, ..BootstrapConfig::for_length(t_len) };
            for k in 0..5 {
                let col: Vec<f64> = mult.column(k).iter().copied().collect();
                let direct = bootstrap_replicate(&s, 4, &cfg, &col).unwrap();
                for (a, b) in batched[k].iter().zip(&direct) {
                    assert!((a.norm - b.norm).abs() <= 1e-10 * b.norm.abs().max(1e-12), "{a:?} vs {b:?}");
                    assert!((a.inner - b.inner).abs() <= 1e-10 * b.inner.abs().max(1e-12), "{a:?} vs {b:?}");
                }
            }
        }
    }

    #[test]
    fn path_reproduces_replicate() {
        let s = random_series(23, 3, 9);
        for bw in [Bandwidth::Global, Bandwidth::Window(4)] {
            let cfg = BootstrapConfig { block_len: 3, bandwidth: bw, ..BootstrapConfig::for_length(23) };
            let mult = draw_multipliers(23, 1, 4);
            let col: Vec<f64> = mult.column(0).iter().copied().collect();
            let reps = bootstrap_replicate(&s, 2, &cfg, &col).unwrap();
            for h in 1..=2 {
                let path = bootstrap_path(&s, h, &cfg, &col).unwrap();
                let norm = (path.iter().map(|b| b.norm_squared()).sum::<f64>() / 23.0).sqrt();
                assert!((norm - reps[h - 1].norm).abs() < 1e-10);
                let mut mhat = DMatrix::zeros(3, 3);
                let mut inner = 0.0;
                for (t, b) in path.iter().enumerate() {
                    inner += b.dot(&mhat) / 23.0;
                    if t < 23 - h {
                        let a = DVector::from_column_slice(s.row(t));
                        let c = DVector::from_column_slice(s.row(t + h));
                        mhat += a * c.transpose() / 23.0;
                    }
                }
                assert!((inner - reps[h - 1].inner).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn p_values_and_ties() {
        assert_eq!(bootstrap_p_value(1.0, &[0.5, 1.0, 2.0, 0.1]), 0.5);
        assert_eq!(bootstrap_p_value(0.0, &[0.0, 0.0]), 1.0);
    }

    #[test]
    fn relevant_requires_small_alpha() {
        let s = random_series(20, 3, 2);
        let cfg = BootstrapConfig { alpha: 0.5, ..BootstrapConfig::for_length(20) };
        assert!(run_relevant_test(&s, 1, &[0.1], &cfg).is_err());
        assert!(run_portmanteau_test(&s, 1, &cfg).is_ok());
    }

    #[test]
    fn config_validation() {
        let mut cfg = BootstrapConfig::for_length(50);
        assert!(cfg.validate(50).is_ok());
        cfg.bandwidth = Bandwidth::Window(0);
        assert!(cfg.validate(50).is_err());
        cfg.bandwidth = Bandwidth::Window(51);
        assert!(cfg.validate(50).is_err());
        cfg.bandwidth = Bandwidth::Window(20);
        cfg.replicates = 0;
        assert!(cfg.validate(50).is_err());
        cfg.replicates = 10;
        cfg.alpha = 1.0;
        assert!(cfg.validate(50).is_err());
        cfg.alpha = 0.05;
        cfg.block_len = 30;
        assert!(cfg.validate(50).is_ok());
        assert_eq!(cfg.block_condition_warnings(50).len(), 1);
    }

    #[test]
    fn zero_series_relevant_test() {
        let s = CoefficientSeries::new(vec![0.0; 30 * 3], 30, 3).unwrap();
        let cfg = BootstrapConfig { replicates: 20, ..BootstrapConfig::for_length(30) };
        let r = run_relevant_test(&s, 2, &[0.1, 0.1], &cfg).unwrap();
        assert_eq!(r.relevant.as_ref().unwrap().max_stat, 0.0);
        assert!(r.boot_inners.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(r.p_value(), 1.0);
        assert!(!r.reject);
    }
}
