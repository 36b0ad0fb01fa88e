//! Functional-data algebra on a uniform midpoint grid of `[0, 1]`.
//!
//! Curves are stored as their values at the midpoints `τ_j = (j - 1/2) / m`,
//! and L² inner products are evaluated with the midpoint rule (weight `1/m`
//! per point). All test statistics are computed on the coordinates of the
//! curves with respect to the orthonormal Fourier basis
//! `ψ_0 = 1, ψ_{2n-1} = √2 sin(2πnτ), ψ_{2n} = √2 cos(2πnτ)`, where L² norms
//! of curves and of integral kernels reduce to Euclidean and Frobenius norms.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of Fourier basis functions used for projection.
pub const DEFAULT_BASIS_DIM: usize = 17;

/// Midpoint grid with `m` points on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid1D {
    m: usize,
}

impl Grid1D {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("grid size must be at least 1"));
        }
        Ok(Self { m })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of every grid point.
    pub fn weight(&self) -> f64 {
        1.0 / self.m as f64
    }

    /// The `j`-th grid point (0-based).
    #[inline]
    pub fn point(&self, j: usize) -> f64 {
        (j as f64 + 0.5) / self.m as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.point(j)).collect()
    }

    /// Midpoint-rule integral of a grid function over `[0, 1]`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() / self.m as f64
    }
}

pub fn make_uniform_grid(m: usize) -> Result<Grid1D> {
    Grid1D::new(m)
}

/// L² inner product of two grid functions by the midpoint rule.
pub fn l2_inner_grid(f: &[f64], g: &[f64], grid: &Grid1D) -> Result<f64> {
    if f.len() != grid.len() || g.len() != grid.len() {
        return Err(Error::invalid(format!(
            "grid functions of length {} and {} do not match grid size {}",
            f.len(),
            g.len(),
            grid.len()
        )));
    }
    let s: f64 = f.iter().zip(g).map(|(a, b)| a * b).sum();
    Ok(s / grid.len() as f64)
}

/// Value of the `index`-th Fourier basis function at `tau`.
#[inline]
pub fn fourier_basis_eval(index: usize, tau: f64) -> f64 {
    if index == 0 {
        return 1.0;
    }
    let freq = index.div_ceil(2) as f64;
    let arg = 2.0 * PI * freq * tau;
    if index % 2 == 1 {
        SQRT_2 * arg.sin()
    } else {
        SQRT_2 * arg.cos()
    }
}

/// `m × dim` matrix (row-major) of basis values at the grid points.
pub(crate) fn basis_matrix(grid: &Grid1D, dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len() * dim);
    for j in 0..grid.len() {
        let tau = grid.point(j);
        out.extend((0..dim).map(|d| fourier_basis_eval(d, tau)));
    }
    out
}

/// `T` curves observed on a shared grid; row `t` holds `X_t(τ_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSeries {
    values: Vec<f64>,
    len: usize,
    grid: Grid1D,
}

impl FunctionalSeries {
    pub fn new(values: Vec<f64>, len: usize, grid: Grid1D) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("a functional series needs at least one curve"));
        }
        if values.len() != len * grid.len() {
            return Err(Error::invalid(format!(
                "expected {} values for {} curves on {} points, got {}",
                len * grid.len(),
                len,
                grid.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain { t: pos / grid.len(), j: pos % grid.len(), message: "non-finite value".into() });
        }
        Ok(Self { values, len, grid })
    }

    pub fn from_rows(rows: &[Vec<f64>], grid: Grid1D) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * grid.len());
        for (t, row) in rows.iter().enumerate() {
            if row.len() != grid.len() {
                return Err(Error::invalid(format!("curve {t} has {} points, grid has {}", row.len(), grid.len())));
            }
            values.extend_from_slice(row);
        }
        Self::new(values, rows.len(), grid)
    }

    /// Number of curves `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn curve(&self, t: usize) -> &[f64] {
        let m = self.grid.len();
        &self.values[t * m..(t + 1) * m]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.grid.len())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * c).collect(), len: self.len, grid: self.grid }
    }
}

/// Fourier coordinates of `T` curves; row `t` holds `⟨X_t, ψ_d⟩`, `d = 0..D`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSeries {
    coef: Vec<f64>,
    len: usize,
    dim: usize,
}

impl CoefficientSeries {
    pub fn new(coef: Vec<f64>, len: usize, dim: usize) -> Result<Self> {
        if len == 0 || dim == 0 {
            return Err(Error::invalid("coefficient series must have T >= 1 and D >= 1"));
        }
        if coef.len() != len * dim {
            return Err(Error::invalid(format!(
                "expected {} coefficients for T={len}, D={dim}, got {}",
                len * dim,
                coef.len()
            )));
        }
        if let Some(pos) = coef.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain { t: pos / dim, j: pos % dim, message: "non-finite coefficient".into() });
        }
        Ok(Self { coef, len, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("coefficient rows have differing lengths"));
        }
        Self::new(rows.concat(), rows.len(), dim)
    }

    /// Number of observations `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Basis dimension `D`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.coef[t * self.dim..(t + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coef
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { coef: self.coef.iter().map(|v| v * c).collect(), len: self.len, dim: self.dim }
    }

    /// Evaluates `Σ_d coef_d ψ_d` at the points of `grid`.
    pub fn reconstruct(&self, grid: Grid1D) -> FunctionalSeries {
        let basis = basis_matrix(&grid, self.dim);
        let m = grid.len();
        let mut values = vec![0.0; self.len * m];
        for (t, out) in values.chunks_exact_mut(m).enumerate() {
            let a = self.row(t);
            for (j, v) in out.iter_mut().enumerate() {
                let psi = &basis[j * self.dim..(j + 1) * self.dim];
                *v = a.iter().zip(psi).map(|(x, y)| x * y).sum();
            }
        }
        FunctionalSeries { values, len: self.len, grid }
    }
}

/// Projects every curve onto the first `dim` Fourier basis functions.
pub fn project_fourier(series: &FunctionalSeries, dim: usize) -> Result<CoefficientSeries> {
    if dim == 0 {
        return Err(Error::invalid("basis dimension must be at least 1"));
    }
    let grid = series.grid();
    let m = grid.len();
    let basis = basis_matrix(grid, dim);
    let mut coef = vec![0.0; series.len() * dim];
    for (x, out) in series.rows().zip(coef.chunks_exact_mut(dim)) {
        for (j, &xv) in x.iter().enumerate() {
            let psi = &basis[j * dim..(j + 1) * dim];
            for (o, p) in out.iter_mut().zip(psi) {
                *o += xv * p;
            }
        }
        for o in out.iter_mut() {
            *o /= m as f64;
        }
    }
    CoefficientSeries::new(coef, series.len(), dim)
}
