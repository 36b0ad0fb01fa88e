//! C ABI over `lsportmanteau`.
//!
//! Series live behind opaque `LspSeries` handles created by the
//! `lsp_series_*` constructors and released with [`lsp_series_free`]. Every
//! fallible call returns an [`LspStatus`]; on failure the message is available
//! from [`lsp_last_error`] until the next failing call on the same thread.
//! Output buffers are caller-allocated.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use lsportmanteau::bootstrap::{default_block_length, BandwidthChoice, BootstrapConfig, TestResult};
use lsportmanteau::lagcov::lag_norms;
use lsportmanteau::seed::{derive_seed, STREAM_DATA};
use lsportmanteau::{
    project_fourier, run_portmanteau_test, run_relevant_test, CoefficientSeries, Error, FunctionalSeries, Grid1D,
    ModelGenerator, ModelId,
};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LspStatus {
    Ok = 0,
    InvalidArgument = 1,
    ParseError = 2,
    DomainError = 3,
    IoError = 4,
    NullPointer = 5,
    Panic = 6,
}

/// Centre with the global product moment.
pub const LSP_BANDWIDTH_GLOBAL: u32 = 0;
/// Centre over `⌊T^{2/3}⌋` neighbours on each side.
pub const LSP_BANDWIDTH_AUTO: u32 = 1;
/// Centre over `bandwidth` neighbours on each side.
pub const LSP_BANDWIDTH_FIXED: u32 = 2;

/// Bootstrap settings. Obtain defaults from [`lsp_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LspTestConfig {
    pub replicates: usize,
    /// Block length; 0 selects `⌊T^{1/3}⌋`.
    pub block_len: usize,
    /// One of the `LSP_BANDWIDTH_*` constants.
    pub bandwidth_mode: u32,
    /// Half-width used with `LSP_BANDWIDTH_FIXED`.
    pub bandwidth: usize,
    pub alpha: f64,
    pub seed: u64,
}

/// Opaque handle to a series of Fourier coefficient vectors.
pub struct LspSeries {
    coef: CoefficientSeries,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> LspStatus {
    match e {
        Error::InvalidArgument(_) => LspStatus::InvalidArgument,
        Error::Parse { .. } => LspStatus::ParseError,
        Error::Domain { .. } => LspStatus::DomainError,
        Error::Io(_) => LspStatus::IoError,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), LspStatusError>>(f: F) -> LspStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LspStatus::Ok,
        Ok(Err(LspStatusError(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LspStatus::Panic
        }
    }
}

struct LspStatusError(LspStatus, String);

impl From<Error> for LspStatusError {
    fn from(e: Error) -> Self {
        LspStatusError(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> LspStatusError {
    LspStatusError(LspStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> LspStatusError {
    LspStatusError(LspStatus::InvalidArgument, msg.into())
}

unsafe fn input<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], LspStatusError> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn output<'a>(p: *mut f64, n: usize, what: &str) -> Result<&'a mut [f64], LspStatusError> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, n))
}

unsafe fn series_ref<'a>(s: *const LspSeries) -> Result<&'a LspSeries, LspStatusError> {
    s.as_ref().ok_or_else(|| null("series"))
}

fn emit_handle(out: *mut *mut LspSeries, coef: CoefficientSeries) -> Result<(), LspStatusError> {
    unsafe { *out = Box::into_raw(Box::new(LspSeries { coef })) };
    Ok(())
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lsp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lsp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Projects `len` curves sampled on a midpoint grid of `grid_size` points
/// (row-major, one curve per row) onto the first `basis_dim` Fourier
/// functions.
#[no_mangle]
pub unsafe extern "C" fn lsp_series_from_grid(
    values: *const f64,
    len: usize,
    grid_size: usize,
    basis_dim: usize,
    out: *mut *mut LspSeries,
) -> LspStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let n = len.checked_mul(grid_size).ok_or_else(|| invalid("len * grid_size overflows"))?;
        let v = input(values, n, "values")?;
        let curves = FunctionalSeries::new(v.to_vec(), len, Grid1D::new(grid_size)?)?;
        emit_handle(out, project_fourier(&curves, basis_dim)?)
    })
}

/// Wraps `len` coefficient vectors of dimension `dim` (row-major).
#[no_mangle]
pub unsafe extern "C" fn lsp_series_from_coefficients(
    coef: *const f64,
    len: usize,
    dim: usize,
    out: *mut *mut LspSeries,
) -> LspStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let n = len.checked_mul(dim).ok_or_else(|| invalid("len * dim overflows"))?;
        let v = input(coef, n, "coef")?;
        emit_handle(out, CoefficientSeries::new(v.to_vec(), len, dim)?)
    })
}

/// Simulates model `model` (`"N1"` .. `"N4"`, `"A1"` .. `"A6"`) and projects it.
/// The sample equals the one produced by `lsportmanteau simulate --seed`.
#[no_mangle]
pub unsafe extern "C" fn lsp_series_simulate(
    model: *const c_char,
    len: usize,
    grid_size: usize,
    burn_in: usize,
    seed: u64,
    basis_dim: usize,
    out: *mut *mut LspSeries,
) -> LspStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if model.is_null() {
            return Err(null("model"));
        }
        let name = CStr::from_ptr(model).to_str().map_err(|_| invalid("model name is not UTF-8"))?;
        let id: ModelId = name.parse()?;
        let generator = ModelGenerator::new(id, len, Grid1D::new(grid_size)?, burn_in)?;
        let curves = generator.generate(derive_seed(seed, STREAM_DATA, 0))?;
        emit_handle(out, project_fourier(&curves, basis_dim)?)
    })
}

/// Number of curves `T`; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn lsp_series_len(series: *const LspSeries) -> usize {
    series.as_ref().map_or(0, |s| s.coef.len())
}

/// Basis dimension `D`; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn lsp_series_dim(series: *const LspSeries) -> usize {
    series.as_ref().map_or(0, |s| s.coef.dim())
}

/// Copies the `T × D` coefficients (row-major) into `out`.
#[no_mangle]
pub unsafe extern "C" fn lsp_series_coefficients(series: *const LspSeries, out: *mut f64, out_len: usize) -> LspStatus {
    guard(|| {
        let s = series_ref(series)?;
        let src = s.coef.as_slice();
        if out_len < src.len() {
            return Err(invalid(format!("output buffer holds {out_len} values, need {}", src.len())));
        }
        output(out, src.len(), "out")?.copy_from_slice(src);
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn lsp_series_free(series: *mut LspSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Fills `config` with the defaults for a series of length `len`: 200
/// replicates, block length `⌊T^{1/3}⌋`, global centring, `α = 0.05`, seed 0.
#[no_mangle]
pub unsafe extern "C" fn lsp_config_default(len: usize, config: *mut LspTestConfig) -> LspStatus {
    guard(|| {
        let c = config.as_mut().ok_or_else(|| null("config"))?;
        let d = BootstrapConfig::for_length(len.max(1));
        *c = LspTestConfig {
            replicates: d.replicates,
            block_len: d.block_len,
            bandwidth_mode: LSP_BANDWIDTH_GLOBAL,
            bandwidth: 0,
            alpha: d.alpha,
            seed: d.seed,
        };
        Ok(())
    })
}

fn resolve_config(c: &LspTestConfig, len: usize) -> Result<BootstrapConfig, LspStatusError> {
    let choice = match c.bandwidth_mode {
        LSP_BANDWIDTH_GLOBAL => BandwidthChoice::Global,
        LSP_BANDWIDTH_AUTO => BandwidthChoice::Auto,
        LSP_BANDWIDTH_FIXED => BandwidthChoice::Fixed(c.bandwidth),
        other => return Err(invalid(format!("unknown bandwidth mode {other}"))),
    };
    Ok(BootstrapConfig {
        replicates: c.replicates,
        block_len: if c.block_len == 0 { default_block_length(len) } else { c.block_len },
        bandwidth: choice.resolve(len)?,
        alpha: c.alpha,
        seed: c.seed,
    })
}

/// `‖M̂_h‖_{2,3}` for `h = 1..=max_lag`, written to `norms[0..max_lag]`.
#[no_mangle]
pub unsafe extern "C" fn lsp_lag_norms(series: *const LspSeries, max_lag: usize, norms: *mut f64) -> LspStatus {
    guard(|| {
        let s = series_ref(series)?;
        let v = lag_norms(&s.coef, max_lag)?;
        output(norms, max_lag, "norms")?.copy_from_slice(&v);
        Ok(())
    })
}

fn write_results(
    res: &TestResult,
    p: &[f64],
    stats: &[f64],
    p_values: *mut f64,
    statistics: *mut f64,
    reject: *mut bool,
) -> Result<(), LspStatusError> {
    let h = res.meta.max_lag;
    unsafe {
        output(p_values, h, "p_values")?.copy_from_slice(p);
        if !statistics.is_null() {
            slice::from_raw_parts_mut(statistics, h).copy_from_slice(stats);
        }
        if let Some(r) = reject.as_mut() {
            *r = res.reject;
        }
    }
    Ok(())
}

/// Bootstrap test of no serial correlation up to lag `max_lag`.
///
/// `p_values[k]` receives the p-value for maximal lag `k + 1`. When not
/// null, `statistics[k]` receives `√T ‖M̂_{k+1}‖_{2,3}` and `reject` the
/// decision at level `α` for the full maximal lag.
#[no_mangle]
pub unsafe extern "C" fn lsp_portmanteau_test(
    series: *const LspSeries,
    max_lag: usize,
    config: *const LspTestConfig,
    p_values: *mut f64,
    statistics: *mut f64,
    reject: *mut bool,
) -> LspStatus {
    guard(|| {
        let s = series_ref(series)?;
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let cfg = resolve_config(c, s.coef.len())?;
        let res = run_portmanteau_test(&s.coef, max_lag, &cfg)?;
        write_results(&res, &res.p_classical, &res.classical.per_lag, p_values, statistics, reject)
    })
}

/// Bootstrap test of `‖M_h‖_{2,3} <= thresholds[h-1]` for all `h <= max_lag`
/// (requires `α < 1/2`). Outputs as in [`lsp_portmanteau_test`], with
/// `statistics[k] = √T (‖M̂‖ - Δ) ‖M̂‖` at lag `k + 1`.
#[no_mangle]
pub unsafe extern "C" fn lsp_relevant_test(
    series: *const LspSeries,
    max_lag: usize,
    thresholds: *const f64,
    config: *const LspTestConfig,
    p_values: *mut f64,
    statistics: *mut f64,
    reject: *mut bool,
) -> LspStatus {
    guard(|| {
        let s = series_ref(series)?;
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let d = input(thresholds, max_lag, "thresholds")?;
        let cfg = resolve_config(c, s.coef.len())?;
        let res = run_relevant_test(&s.coef, max_lag, d, &cfg)?;
        let p = res.p_relevant.clone().unwrap_or_default();
        let stats = res.relevant.as_ref().map(|r| r.per_lag.clone()).unwrap_or_default();
        write_results(&res, &p, &stats, p_values, statistics, reject)
    })
}
