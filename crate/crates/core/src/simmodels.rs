//! Generators for the simulation models.
//!
//! | model | recursion                                   | kernel   | noise  |
//! |-------|---------------------------------------------|----------|--------|
//! | N1    | `X_t = B_t`                                 | –        | BM     |
//! | N2    | `X_t = B_t`                                 | –        | bridge |
//! | N3    | FARCH(1), `c_ψ = 0.3418`                    | –        | BM     |
//! | N4    | `X_{t,T} = σ(t/T) B_t`                      | –        | BM     |
//! | A1/A2 | `X_t = ρ X_{t-1} + ε_t`                     | Gaussian | BM/bridge |
//! | A3/A4 | `X_t = ρ X_{t-1} + ε_t`                     | Wiener   | BM/bridge |
//! | A5    | `X_{t,T} = ρ X_{t-1,T} + σ(t/T) B_t`        | Gaussian | BM     |
//! | A6    | `X_{t,T} = σ(t/T) ρ X_{t-1,T} + B_t`        | Gaussian | BM     |
//!
//! with `σ(x) = x + 1/2` and kernels scaled to Hilbert–Schmidt norm 0.3.
//!
//! Every model starts from `X_0 = 0`, runs `burn_in` discarded steps and then
//! `T` observed steps. Each step consumes exactly one noise path, i.e. `m + 1`
//! standard normals in grid order, so different models driven by the same
//! seed see the same innovations.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FunctionalSeries, Grid1D};

/// FARCH(1) kernel constant.
pub const FARCH_C_PSI: f64 = 0.3418;
/// Hilbert–Schmidt norm of the FAR(1) operators.
pub const KERNEL_HS_NORM: f64 = 0.3;
pub const DEFAULT_BURN_IN: usize = 100;

/// Variance profile `σ(x) = x + 1/2` of the heteroscedastic models.
pub fn variance_profile(x: f64) -> f64 {
    x + 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelId {
    N1,
    N2,
    N3,
    N4,
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
}

impl ModelId {
    pub const ALL: [ModelId; 10] = [
        ModelId::N1,
        ModelId::N2,
        ModelId::N3,
        ModelId::N4,
        ModelId::A1,
        ModelId::A2,
        ModelId::A3,
        ModelId::A4,
        ModelId::A5,
        ModelId::A6,
    ];

    /// Whether the model is serially uncorrelated.
    pub fn is_null(self) -> bool {
        matches!(self, ModelId::N1 | ModelId::N2 | ModelId::N3 | ModelId::N4)
    }

    /// Whether the second-order structure changes over time.
    pub fn is_locally_stationary(self) -> bool {
        matches!(self, ModelId::N4 | ModelId::A5 | ModelId::A6)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown model id {s:?}; expected one of N1-N4, A1-A6")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: ModelId,
    pub series_len: usize,
    pub grid: Grid1D,
    pub burn_in: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(id: ModelId, series_len: usize, grid: Grid1D, seed: u64) -> Self {
        Self { id, series_len, grid, burn_in: DEFAULT_BURN_IN, seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    /// `K(τ, σ) ∝ exp((τ² + σ²)/2)`
    Gaussian,
    /// `K(τ, σ) ∝ min(τ, σ)`
    Wiener,
}

#[derive(Debug, Clone, PartialEq)]
enum KernelShape {
    Zero,
    Dense,
    /// `K(τ_i, σ_j) = left_i · right_j`
    Separable {
        left: Vec<f64>,
        right: Vec<f64>,
    },
    /// `K(τ_i, σ_j) = min(τ_i, σ_j)`
    Min,
}

/// Integral kernel sampled on the grid, `values[i * m + j] = K(τ_i, τ_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    values: Vec<f64>,
    grid: Grid1D,
    hs_norm: f64,
    scale: f64,
    shape: KernelShape,
}

/// Discrete L²([0,1]²) norm of a kernel matrix.
fn quadrature_hs_norm(values: &[f64], m: usize) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() / (m * m) as f64).sqrt()
}

impl KernelMatrix {
    pub fn zero(grid: Grid1D) -> Self {
        let m = grid.len();
        Self { values: vec![0.0; m * m], grid, hs_norm: 0.0, scale: 0.0, shape: KernelShape::Zero }
    }

    /// Arbitrary kernel given by its values on the grid.
    pub fn from_values(values: Vec<f64>, grid: Grid1D) -> Result<Self> {
        let m = grid.len();
        if values.len() != m * m {
            return Err(Error::invalid(format!("kernel needs {} values, got {}", m * m, values.len())));
        }
        let hs_norm = quadrature_hs_norm(&values, m);
        Ok(Self { values, grid, hs_norm, scale: 1.0, shape: KernelShape::Dense })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn hs_norm(&self) -> f64 {
        self.hs_norm
    }

    /// Factor applied to the raw kernel (`c_g` or `c_w`).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_zero(&self) -> bool {
        self.shape == KernelShape::Zero
    }

    pub fn rescaled(&self, factor: f64) -> Self {
        let shape = match &self.shape {
            KernelShape::Separable { left, right } => {
                KernelShape::Separable { left: left.iter().map(|v| v * factor).collect(), right: right.clone() }
            }
            other => other.clone(),
        };
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            grid: self.grid,
            hs_norm: self.hs_norm * factor.abs(),
            scale: self.scale * factor,
            shape,
        }
    }

    /// `ρ(f)(τ_i) = m⁻¹ Σ_j K(τ_i, τ_j) f(τ_j)`.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        let m = self.grid.len();
        assert_eq!(f.len(), m);
        assert_eq!(out.len(), m);
        let w = 1.0 / m as f64;
        match &self.shape {
            KernelShape::Zero => out.fill(0.0),
            KernelShape::Dense => self.apply_dense(f, out),
            KernelShape::Separable { left, right } => {
                let proj = right.iter().zip(f).map(|(r, x)| r * x).sum::<f64>() * w;
                out.iter_mut().zip(left).for_each(|(o, l)| *o = l * proj);
            }
            KernelShape::Min => {
                // m⁻¹ [Σ_{j<=i} τ_j f_j + τ_i Σ_{j>i} f_j]
                let total: f64 = f.iter().sum();
                let mut below = 0.0;
                let mut head = 0.0;
                for (i, o) in out.iter_mut().enumerate() {
                    let tau = self.grid.point(i);
                    below += tau * f[i];
                    head += f[i];
                    *o = self.scale * w * (below + tau * (total - head));
                }
            }
        }
    }

    /// Matrix–vector quadrature on the stored values, for any shape.
    pub fn apply_dense(&self, f: &[f64], out: &mut [f64]) {
        let m = self.grid.len();
        let w = 1.0 / m as f64;
        for (o, row) in out.iter_mut().zip(self.values.chunks_exact(m)) {
            *o = row.iter().zip(f).map(|(k, x)| k * x).sum::<f64>() * w;
        }
    }
}

/// Kernel of the given kind, scaled to Hilbert–Schmidt norm `target_hs`.
pub fn make_integral_kernel(kind: KernelKind, grid: Grid1D, target_hs: f64) -> Result<KernelMatrix> {
    if !(target_hs.is_finite() && target_hs > 0.0) {
        return Err(Error::invalid(format!("target Hilbert-Schmidt norm must be > 0, got {target_hs}")));
    }
    let m = grid.len();
    let points = grid.points();
    let (values, shape) = match kind {
        KernelKind::Gaussian => {
            let g: Vec<f64> = points.iter().map(|t| (t * t / 2.0).exp()).collect();
            let mut values = Vec::with_capacity(m * m);
            for &gi in &g {
                values.extend(g.iter().map(|gj| gi * gj));
            }
            (values, KernelShape::Separable { left: g.clone(), right: g })
        }
        KernelKind::Wiener => {
            let mut values = Vec::with_capacity(m * m);
            for &ti in &points {
                values.extend(points.iter().map(|&tj| ti.min(tj)));
            }
            (values, KernelShape::Min)
        }
    };
    let raw_norm = quadrature_hs_norm(&values, m);
    if raw_norm == 0.0 || !raw_norm.is_finite() {
        return Err(Error::invalid("kernel has zero norm on this grid"));
    }
    let raw = KernelMatrix { values, grid, hs_norm: raw_norm, scale: 1.0, shape };
    Ok(raw.rescaled(target_hs / raw_norm))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseKind {
    BrownianMotion,
    BrownianBridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Heteroscedasticity {
    None,
    /// `X_{t,T} = ρ X_{t-1,T} + σ(t/T) ε_t`
    NoiseScaled,
    /// `X_{t,T} = σ(t/T) ρ X_{t-1,T} + ε_t`
    OperatorScaled,
}

/// Number of standard normals consumed per noise path.
pub fn normals_per_path(grid: &Grid1D) -> usize {
    grid.len() + 1
}

/// Brownian path on the midpoint grid from `m + 1` standard normals: the
/// first scales to `B(τ_1) ~ N(0, τ_1)`, the next `m - 1` are the increments
/// between grid points and the last carries the path from `τ_m` to `1`.
pub fn brownian_path_from_normals(grid: &Grid1D, normals: &[f64], bridge: bool, out: &mut [f64]) {
    let m = grid.len();
    assert_eq!(normals.len(), m + 1);
    assert_eq!(out.len(), m);
    let half = (0.5 / m as f64).sqrt();
    let full = (1.0 / m as f64).sqrt();
    let mut b = half * normals[0];
    out[0] = b;
    for j in 1..m {
        b += full * normals[j];
        out[j] = b;
    }
    if bridge {
        let end = b + half * normals[m];
        for (j, v) in out.iter_mut().enumerate() {
            *v -= grid.point(j) * end;
        }
    }
}

/// Brownian motion or bridge sampled on the grid.
pub fn gen_gaussian_path<R: Rng + ?Sized>(grid: &Grid1D, rng: &mut R, bridge: bool) -> Vec<f64> {
    let normals: Vec<f64> = (0..normals_per_path(grid)).map(|_| rng.sample(StandardNormal)).collect();
    let mut out = vec![0.0; grid.len()];
    brownian_path_from_normals(grid, &normals, bridge, &mut out);
    out
}

struct PathSource {
    rng: ChaCha8Rng,
    normals: Vec<f64>,
}

impl PathSource {
    fn new(seed: u64, grid: &Grid1D) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), normals: vec![0.0; normals_per_path(grid)] }
    }

    fn next(&mut self, grid: &Grid1D, noise: NoiseKind, out: &mut [f64]) {
        for z in self.normals.iter_mut() {
            *z = self.rng.sample(StandardNormal);
        }
        brownian_path_from_normals(grid, &self.normals, noise == NoiseKind::BrownianBridge, out);
    }
}

fn check_spec(spec: &ModelSpec) -> Result<()> {
    if spec.series_len == 0 {
        return Err(Error::invalid("series length must be at least 1"));
    }
    Ok(())
}

/// Rescaled time of step `step` (0-based, burn-in included); burn-in steps
/// are placed at `u = 0`.
fn rescaled_time(step: usize, spec: &ModelSpec) -> f64 {
    if step < spec.burn_in {
        0.0
    } else {
        (step - spec.burn_in + 1) as f64 / spec.series_len as f64
    }
}

/// FAR(1) recursion `X_t = ρ(X_{t-1}) + ε_t` with optional time-varying scale.
pub fn gen_far1(
    spec: &ModelSpec,
    kernel: &KernelMatrix,
    noise: NoiseKind,
    hetero: Heteroscedasticity,
) -> Result<FunctionalSeries> {
    check_spec(spec)?;
    if kernel.grid() != &spec.grid {
        return Err(Error::invalid("kernel and model use different grids"));
    }
    let grid = spec.grid;
    let m = grid.len();
    let mut source = PathSource::new(spec.seed, &grid);
    let mut prev = vec![0.0; m];
    let mut ar = vec![0.0; m];
    let mut eps = vec![0.0; m];
    let mut values = Vec::with_capacity(spec.series_len * m);
    for step in 0..spec.burn_in + spec.series_len {
        source.next(&grid, noise, &mut eps);
        kernel.apply(&prev, &mut ar);
        let sigma = variance_profile(rescaled_time(step, spec));
        let (ar_scale, noise_scale) = match hetero {
            Heteroscedasticity::None => (1.0, 1.0),
            Heteroscedasticity::NoiseScaled => (1.0, sigma),
            Heteroscedasticity::OperatorScaled => (sigma, 1.0),
        };
        for j in 0..m {
            prev[j] = ar_scale * ar[j] + noise_scale * eps[j];
        }
        if step >= spec.burn_in {
            values.extend_from_slice(&prev);
        }
    }
    FunctionalSeries::new(values, spec.series_len, grid)
}

/// `τ + c_ψ ∫ exp((τ² + σ²)/2) X_{t-1}(σ)² dσ` on the grid.
pub fn farch_radicand(grid: &Grid1D, prev: &[f64], c_psi: f64, out: &mut [f64]) {
    let m = grid.len();
    let integral = (0..m)
        .map(|j| {
            let s = grid.point(j);
            (s * s / 2.0).exp() * prev[j] * prev[j]
        })
        .sum::<f64>()
        / m as f64;
    for (i, o) in out.iter_mut().enumerate() {
        let tau = grid.point(i);
        *o = tau + c_psi * (tau * tau / 2.0).exp() * integral;
    }
}

/// FARCH(1) recursion `X_t(τ) = B_t(τ) √(τ + ∫ c_ψ e^{(τ²+σ²)/2} X_{t-1}²(σ) dσ)`.
pub fn gen_farch1(spec: &ModelSpec, c_psi: f64) -> Result<FunctionalSeries> {
    check_spec(spec)?;
    if !(c_psi.is_finite() && c_psi >= 0.0) {
        return Err(Error::invalid(format!("c_psi must be >= 0, got {c_psi}")));
    }
    let grid = spec.grid;
    let m = grid.len();
    let mut source = PathSource::new(spec.seed, &grid);
    let mut prev = vec![0.0; m];
    let mut rad = vec![0.0; m];
    let mut b = vec![0.0; m];
    let mut values = Vec::with_capacity(spec.series_len * m);
    for step in 0..spec.burn_in + spec.series_len {
        source.next(&grid, NoiseKind::BrownianMotion, &mut b);
        farch_radicand(&grid, &prev, c_psi, &mut rad);
        for j in 0..m {
            prev[j] = b[j] * rad[j].sqrt();
        }
        if step >= spec.burn_in {
            values.extend_from_slice(&prev);
        }
    }
    FunctionalSeries::new(values, spec.series_len, grid)
}

/// Reusable generator for one model on one grid; the kernel is built once.
#[derive(Debug, Clone)]
pub struct ModelGenerator {
    id: ModelId,
    series_len: usize,
    grid: Grid1D,
    burn_in: usize,
    kernel: KernelMatrix,
}

impl ModelGenerator {
    pub fn new(id: ModelId, series_len: usize, grid: Grid1D, burn_in: usize) -> Result<Self> {
        let kernel = match id {
            ModelId::A1 | ModelId::A2 | ModelId::A5 | ModelId::A6 => {
                make_integral_kernel(KernelKind::Gaussian, grid, KERNEL_HS_NORM)?
            }
            ModelId::A3 | ModelId::A4 => make_integral_kernel(KernelKind::Wiener, grid, KERNEL_HS_NORM)?,
            ModelId::N1 | ModelId::N2 | ModelId::N3 | ModelId::N4 => KernelMatrix::zero(grid),
        };
        Ok(Self { id, series_len, grid, burn_in, kernel })
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        Self::new(spec.id, spec.series_len, spec.grid, spec.burn_in)
    }

    pub fn id(&self) -> ModelId {
        self.id
    }

    pub fn spec(&self, seed: u64) -> ModelSpec {
        ModelSpec { id: self.id, series_len: self.series_len, grid: self.grid, burn_in: self.burn_in, seed }
    }

    pub fn generate(&self, seed: u64) -> Result<FunctionalSeries> {
        use Heteroscedasticity as H;
        use NoiseKind::{BrownianBridge as Bridge, BrownianMotion as Bm};
        let spec = self.spec(seed);
        let k = &self.kernel;
        match self.id {
            ModelId::N1 | ModelId::A1 | ModelId::A3 => gen_far1(&spec, k, Bm, H::None),
            ModelId::N2 | ModelId::A2 | ModelId::A4 => gen_far1(&spec, k, Bridge, H::None),
            ModelId::N3 => gen_farch1(&spec, FARCH_C_PSI),
            ModelId::N4 | ModelId::A5 => gen_far1(&spec, k, Bm, H::NoiseScaled),
            ModelId::A6 => gen_far1(&spec, k, Bm, H::OperatorScaled),
        }
    }
}

pub fn gen_model(spec: &ModelSpec) -> Result<FunctionalSeries> {
    check_spec(spec)?;
    ModelGenerator::from_spec(spec)?.generate(spec.seed)
}

/// Dense operator matrix `m⁻¹ K` for callers that prefer a linear-algebra view.
pub fn operator_matrix(kernel: &KernelMatrix) -> DMatrix<f64> {
    let m = kernel.grid().len();
    DMatrix::from_row_slice(m, m, kernel.values()) / m as f64
}

/// Applies `ρ` through [`operator_matrix`].
pub fn apply_operator(op: &DMatrix<f64>, f: &[f64]) -> Vec<f64> {
    (op * DVector::from_column_slice(f)).iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_uniform_grid;

    fn sample_var(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn model_ids_parse() {
        assert_eq!("a3".parse::<ModelId>().unwrap(), ModelId::A3);
        assert_eq!("N4".parse::<ModelId>().unwrap(), ModelId::N4);
        assert!("B7".parse::<ModelId>().is_err());
        assert!(ModelId::N4.is_locally_stationary() && ModelId::N4.is_null());
        assert!(!ModelId::A1.is_null());
    }

    #[test]
    fn zero_normals_give_zero_path() {
        let g = make_uniform_grid(50).unwrap();
        let mut out = vec![1.0; 50];
        brownian_path_from_normals(&g, &[0.0; 51], false, &mut out);
        assert!(out.iter().all(|&v| v == 0.0));
        brownian_path_from_normals(&g, &[0.0; 51], true, &mut out);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn brownian_variances() {
        let g = make_uniform_grid(1000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut mid = Vec::new();
        let mut end = Vec::new();
        for _ in 0..5000 {
            let p = gen_gaussian_path(&g, &mut rng, false);
            mid.push(p[499]);
            let q = gen_gaussian_path(&g, &mut rng, true);
            end.push(q[999]);
        }
        let v_mid = sample_var(&mid);
        assert!((v_mid - 0.4995).abs() / 0.4995 < 0.05, "Var B(0.5) = {v_mid}");
        assert!(sample_var(&end) < 0.01);
    }

    #[test]
    fn kernel_normalisation() {
        let g = make_uniform_grid(1000).unwrap();
        let w = make_integral_kernel(KernelKind::Wiener, g, 0.3).unwrap();
        assert!((w.hs_norm() - 0.3).abs() < 1e-9);
        assert!((quadrature_hs_norm(w.values(), 1000) - w.hs_norm()).abs() < 1e-12);
        // ∫∫ min(τ,σ)² = 1/6, so c_w = 0.3 √6
        assert!((w.scale() - 0.3 * 6f64.sqrt()).abs() < 1e-6);

        let gk = make_integral_kernel(KernelKind::Gaussian, g, 0.3).unwrap();
        assert!((gk.hs_norm() - 0.3).abs() < 1e-9);
        assert!((gk.scale() - 0.2051).abs() < 1e-4, "c_g = {}", gk.scale());

        let unit = make_integral_kernel(KernelKind::Gaussian, g, 1.0).unwrap().rescaled(0.3);
        for (a, b) in unit.values().iter().zip(gk.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(make_integral_kernel(KernelKind::Wiener, g, 0.0).is_err());
    }

    #[test]
    fn fast_kernel_application_matches_dense() {
        let g = make_uniform_grid(97).unwrap();
        let f: Vec<f64> = g.points().iter().map(|t| (7.0 * t).sin() + t).collect();
        for kind in [KernelKind::Gaussian, KernelKind::Wiener] {
            let k = make_integral_kernel(kind, g, 0.3).unwrap();
            let mut fast = vec![0.0; 97];
            let mut dense = vec![0.0; 97];
            k.apply(&f, &mut fast);
            k.apply_dense(&f, &mut dense);
            let op = apply_operator(&operator_matrix(&k), &f);
            for j in 0..97 {
                assert!((fast[j] - dense[j]).abs() < 1e-12);
                assert!((op[j] - dense[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_kernel_reproduces_noise() {
        let g = make_uniform_grid(30).unwrap();
        let spec = ModelSpec { burn_in: 5, ..ModelSpec::new(ModelId::N1, 20, g, 9) };
        let noise =
            gen_far1(&spec, &KernelMatrix::zero(g), NoiseKind::BrownianMotion, Heteroscedasticity::None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            gen_gaussian_path(&g, &mut rng, false);
        }
        for t in 0..20 {
            assert_eq!(noise.curve(t), gen_gaussian_path(&g, &mut rng, false).as_slice());
        }
        assert_eq!(gen_model(&spec).unwrap(), noise);
    }

    #[test]
    fn same_seed_models_share_innovations() {
        let g = make_uniform_grid(40).unwrap();
        let n1 = gen_model(&ModelSpec::new(ModelId::N1, 10, g, 3)).unwrap();
        let n2 = gen_model(&ModelSpec::new(ModelId::N2, 10, g, 3)).unwrap();
        // the bridge subtracts τ B(1) with B(1) = B(τ_m) + last half increment
        for t in 0..10 {
            let a = n1.curve(t);
            let b = n2.curve(t);
            let slope = (a[0] - b[0]) / g.point(0);
            for j in 0..40 {
                assert!((a[j] - b[j] - slope * g.point(j)).abs() < 1e-12);
            }
        }
        let a1 = gen_model(&ModelSpec::new(ModelId::A1, 10, g, 3)).unwrap();
        let a3 = gen_model(&ModelSpec::new(ModelId::A3, 10, g, 3)).unwrap();
        assert_ne!(a1, a3);
        // with the AR part removed both are the same noise
        let kg = make_integral_kernel(KernelKind::Gaussian, g, 0.3).unwrap();
        let kw = make_integral_kernel(KernelKind::Wiener, g, 0.3).unwrap();
        let mut ar1 = vec![0.0; 40];
        let mut ar3 = vec![0.0; 40];
        for t in 1..10 {
            kg.apply(a1.curve(t - 1), &mut ar1);
            kw.apply(a3.curve(t - 1), &mut ar3);
            for j in 0..40 {
                let e1 = a1.curve(t)[j] - ar1[j];
                let e3 = a3.curve(t)[j] - ar3[j];
                assert!((e1 - e3).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn seed_determinism() {
        let g = make_uniform_grid(25).unwrap();
        for id in ModelId::ALL {
            let spec = ModelSpec::new(id, 15, g, 77);
            assert_eq!(gen_model(&spec).unwrap(), gen_model(&spec).unwrap(), "{id}");
        }
    }

    #[test]
    fn farch_radicand_is_at_least_tau() {
        let g = make_uniform_grid(64).unwrap();
        let spec = ModelSpec::new(ModelId::N3, 50, g, 5);
        let x = gen_farch1(&spec, FARCH_C_PSI).unwrap();
        let mut rad = vec![0.0; 64];
        for t in 0..50 {
            farch_radicand(&g, x.curve(t), FARCH_C_PSI, &mut rad);
            for (j, r) in rad.iter().enumerate() {
                assert!(*r >= g.point(j));
            }
        }
        assert_eq!(FARCH_C_PSI, 0.3418);
    }

    #[test]
    fn farch_without_feedback_has_variance_tau_squared() {
        let g = make_uniform_grid(100).unwrap();
        let spec = ModelSpec { burn_in: 0, ..ModelSpec::new(ModelId::N3, 5000, g, 8) };
        let x = gen_farch1(&spec, 0.0).unwrap();
        for j in [24usize, 49, 89] {
            let tau = g.point(j);
            let vals: Vec<f64> = (0..5000).map(|t| x.curve(t)[j]).collect();
            let v = sample_var(&vals);
            assert!((v - tau * tau).abs() / (tau * tau) < 0.1, "τ = {tau}: {v}");
        }
    }

    #[test]
    fn n4_variance_at_the_end() {
        let g = make_uniform_grid(50).unwrap();
        let j = 29;
        let tau = g.point(j);
        let vals: Vec<f64> = (0..5000)
            .map(|r| {
                let spec = ModelSpec { burn_in: 0, ..ModelSpec::new(ModelId::N4, 4, g, r) };
                gen_model(&spec).unwrap().curve(3)[j]
            })
            .collect();
        let v = sample_var(&vals);
        assert!((v - 2.25 * tau).abs() / (2.25 * tau) < 0.1, "{v} vs {}", 2.25 * tau);
    }

    #[test]
    fn a5_variance_grows_over_time() {
        let g = make_uniform_grid(32).unwrap();
        let j = 16;
        let (mut first, mut last) = (Vec::new(), Vec::new());
        for r in 0..2000 {
            let x = gen_model(&ModelSpec::new(ModelId::A5, 40, g, r)).unwrap();
            first.push(x.curve(0)[j]);
            last.push(x.curve(39)[j]);
        }
        assert!(sample_var(&last) > sample_var(&first));
    }
}
