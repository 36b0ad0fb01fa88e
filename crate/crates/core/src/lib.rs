//! Portmanteau-type tests for serial correlation in locally stationary
//! functional time series.
//!
//! The crate covers the whole pipeline: curves on a grid are projected onto a
//! Fourier basis ([`grid`]), the cumulative lagged product-moment process and
//! its norms give the test statistics ([`lagcov`]), and critical values come
//! from a multiplier block bootstrap ([`bootstrap`]). [`simmodels`] generates
//! the null and alternative models used in simulation studies and [`mc`] runs
//! those studies; [`curves`] reads and preprocesses observed data.

pub mod bootstrap;
pub mod cli;
pub mod curves;
pub mod error;
pub mod grid;
pub mod lagcov;
pub mod mc;
pub mod seed;
pub mod simmodels;

pub use bootstrap::{
    bootstrap_replicate, default_block_length, local_bandwidth, local_product_moment, run_portmanteau_test,
    run_relevant_test, Bandwidth, BandwidthChoice, BootstrapConfig, BootstrapEngine, TestResult,
};
pub use error::{Error, Result};
pub use grid::{
    fourier_basis_eval, l2_inner_grid, make_uniform_grid, project_fourier, CoefficientSeries, FunctionalSeries, Grid1D,
};
pub use lagcov::{
    cum_lag_cov, lagcov_norm_integral, stat_classical, stat_relevant, ClassicalStats, LagCovAccumulator, RelevantStats,
};
pub use simmodels::{gen_model, ModelGenerator, ModelId, ModelSpec};
