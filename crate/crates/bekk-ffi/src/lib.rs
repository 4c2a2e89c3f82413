//! C ABI for the estimation library: opaque handles, status codes, and a
//! thread-local last-error message. All matrices cross the boundary as
//! dense row-major `f64` buffers; `tau = INFINITY` disables truncation.
//!
//! Every function is panic-safe: internal panics surface as
//! `BEKK_STATUS_NUMERIC_ERROR` instead of unwinding across the boundary.

use bekk::backtest::sigma_hat;
use bekk::design::{build_design, regressor_at, ReturnPanel};
use bekk::error::BekkError;
use bekk::fista::{fit_theta, CoefStack, FistaConfig};
use bekk::recovery::{recover_bekk, AdamConfig, BekkParams, WLoss};
use bekk::simulate::{generate_and_simulate, DgpSpec, Innovation};
use libc::{c_char, c_double, c_int, size_t};
use nalgebra::DMatrix;
use std::cell::RefCell;
use std::ffi::CString;
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BekkStatus {
    BekkStatusOk = 0,
    BekkStatusNullArgument = 1,
    BekkStatusInvalidArgument = 2,
    BekkStatusDataError = 3,
    BekkStatusNumericError = 4,
}

use BekkStatus::*;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &BekkError) -> BekkStatus {
    match err {
        BekkError::InvalidInput(_) => BekkStatusInvalidArgument,
        BekkError::Data(_) => BekkStatusDataError,
        BekkError::Numeric(_) | BekkError::Io(_) => BekkStatusNumericError,
    }
}

fn guard(f: impl FnOnce() -> BekkStatus) -> BekkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            BekkStatusNumericError
        }
    }
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn bekk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Static library version string; do not free.
#[no_mangle]
pub extern "C" fn bekk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Opaque return panel.
pub struct BekkPanel {
    inner: ReturnPanel,
}

/// Opaque fitted model: coefficient stack plus the settings it was fit at.
pub struct BekkFit {
    theta: CoefStack,
    tau: f64,
    n_assets: usize,
    kkt_residual: f64,
    converged: bool,
}

/// Opaque recovered BEKK coefficients.
pub struct BekkCoefficients {
    inner: BekkParams,
}

/// Builds a panel from a row-major `rows x cols` buffer of returns.
/// Returns null on invalid input (see [`bekk_last_error_message`]).
///
/// # Safety
/// `data` must point to at least `rows * cols` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn bekk_panel_new(
    data: *const c_double,
    rows: size_t,
    cols: size_t,
) -> *mut BekkPanel {
    if data.is_null() {
        set_error("data pointer is null");
        return std::ptr::null_mut();
    }
    let slice = std::slice::from_raw_parts(data, rows * cols);
    let m = DMatrix::from_fn(rows, cols, |i, j| slice[i * cols + j]);
    match ReturnPanel::new(m) {
        Ok(inner) => Box::into_raw(Box::new(BekkPanel { inner })),
        Err(e) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Frees a panel created by this library. Null is ignored.
///
/// # Safety
/// `panel` must be a pointer returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bekk_panel_free(panel: *mut BekkPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// Number of observations in the panel.
///
/// # Safety
/// `panel` must be a live pointer from [`bekk_panel_new`] or
/// [`bekk_simulate`].
#[no_mangle]
pub unsafe extern "C" fn bekk_panel_rows(panel: *const BekkPanel) -> size_t {
    if panel.is_null() {
        return 0;
    }
    (*panel).inner.t()
}

/// Number of assets in the panel.
///
/// # Safety
/// `panel` must be a live pointer from [`bekk_panel_new`] or
/// [`bekk_simulate`].
#[no_mangle]
pub unsafe extern "C" fn bekk_panel_cols(panel: *const BekkPanel) -> size_t {
    if panel.is_null() {
        return 0;
    }
    (*panel).inner.n()
}

/// Subtracts column means in place.
///
/// # Safety
/// `panel` must be a live pointer from this library.
#[no_mangle]
pub unsafe extern "C" fn bekk_panel_center(panel: *mut BekkPanel) -> BekkStatus {
    if panel.is_null() {
        set_error("panel pointer is null");
        return BekkStatusNullArgument;
    }
    guard(|| {
        let p = &mut *panel;
        p.inner = p.inner.centered();
        BekkStatusOk
    })
}

/// Simulates a BEKK-ARCH panel. `innovation`: 0 = Gaussian, 1 = Laplace,
/// 2 = Student-t with `student_df` degrees of freedom. `ks` holds one
/// component count per lag.
///
/// # Safety
/// `ks` must point to `p` readable entries and `out` must be a valid
/// destination pointer.
#[no_mangle]
pub unsafe extern "C" fn bekk_simulate(
    n: size_t,
    t: size_t,
    p: size_t,
    s: size_t,
    ks: *const size_t,
    innovation: c_int,
    student_df: c_double,
    seed: u64,
    burn_in: size_t,
    out: *mut *mut BekkPanel,
) -> BekkStatus {
    if out.is_null() || ks.is_null() {
        set_error("null output or component-count pointer");
        return BekkStatusNullArgument;
    }
    guard(|| {
        let k = std::slice::from_raw_parts(ks, p).to_vec();
        let kind = match innovation {
            0 => Innovation::Gaussian,
            1 => Innovation::Laplace,
            2 => Innovation::StudentT(student_df),
            other => {
                set_error(&format!("unknown innovation code {other}"));
                return BekkStatusInvalidArgument;
            }
        };
        let spec = DgpSpec { n, p, s, k, innovation: kind, seed, ..Default::default() };
        let run = || -> Result<ReturnPanel, BekkError> {
            Ok(generate_and_simulate(&spec, t, burn_in)?.1.panel)
        };
        match run() {
            Ok(panel) => {
                *out = Box::into_raw(Box::new(BekkPanel { inner: panel }));
                BekkStatusOk
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Fits the truncated penalized regression at fixed `(p, lambda, tau)`.
/// `tau = INFINITY` disables truncation. On success `out` owns a new fit.
///
/// # Safety
/// `panel` must be live and `out` a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn bekk_fit(
    panel: *const BekkPanel,
    p: size_t,
    lambda: c_double,
    tau: c_double,
    tol: c_double,
    block_size: size_t,
    max_iter: size_t,
    out: *mut *mut BekkFit,
) -> BekkStatus {
    if panel.is_null() || out.is_null() {
        set_error("null panel or output pointer");
        return BekkStatusNullArgument;
    }
    guard(|| {
        let panel = &(*panel).inner;
        let cfg = FistaConfig {
            lambda,
            tol: if tol > 0.0 { tol } else { FistaConfig::default().tol },
            block_size: if block_size > 0 { block_size } else { FistaConfig::default().block_size },
            max_iter: if max_iter > 0 { max_iter } else { FistaConfig::default().max_iter },
        };
        let run = || -> Result<BekkFit, BekkError> {
            let design = build_design(panel, p, tau)?;
            let fit = fit_theta(&design, &cfg)?;
            Ok(BekkFit {
                theta: fit.theta,
                tau,
                n_assets: panel.n(),
                kkt_residual: fit.diagnostics.kkt_residual,
                converged: fit.diagnostics.converged,
            })
        };
        match run() {
            Ok(fit) => {
                *out = Box::into_raw(Box::new(fit));
                BekkStatusOk
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Frees a fit. Null is ignored.
///
/// # Safety
/// `fit` must be a pointer returned by [`bekk_fit`] and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bekk_fit_free(fit: *mut BekkFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Coefficient-stack dimensions: rows = p d + 1, cols = d.
///
/// # Safety
/// All pointers must be valid; `fit` must be live.
#[no_mangle]
pub unsafe extern "C" fn bekk_fit_dims(
    fit: *const BekkFit,
    rows: *mut size_t,
    cols: *mut size_t,
) -> BekkStatus {
    if fit.is_null() || rows.is_null() || cols.is_null() {
        set_error("null pointer");
        return BekkStatusNullArgument;
    }
    *rows = (*fit).theta.as_matrix().nrows();
    *cols = (*fit).theta.as_matrix().ncols();
    BekkStatusOk
}

/// Copies the coefficient stack row-major into `out` (`len` doubles).
///
/// # Safety
/// `out` must point to at least `len` writable doubles; `fit` must be live.
#[no_mangle]
pub unsafe extern "C" fn bekk_fit_theta(
    fit: *const BekkFit,
    out: *mut c_double,
    len: size_t,
) -> BekkStatus {
    if fit.is_null() || out.is_null() {
        set_error("null pointer");
        return BekkStatusNullArgument;
    }
    let m = (*fit).theta.as_matrix();
    if len != m.nrows() * m.ncols() {
        set_error(&format!("buffer holds {len} entries, need {}", m.nrows() * m.ncols()));
        return BekkStatusInvalidArgument;
    }
    let dst = std::slice::from_raw_parts_mut(out, len);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dst[i * m.ncols() + j] = m[(i, j)];
        }
    }
    BekkStatusOk
}

/// Maximum KKT violation at the fitted stack.
///
/// # Safety
/// `fit` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bekk_fit_kkt_residual(
    fit: *const BekkFit,
    out: *mut c_double,
) -> BekkStatus {
    if fit.is_null() || out.is_null() {
        set_error("null pointer");
        return BekkStatusNullArgument;
    }
    *out = (*fit).kkt_residual;
    BekkStatusOk
}

/// Whether every solver block converged within its iteration cap.
///
/// # Safety
/// `fit` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bekk_fit_converged(fit: *const BekkFit, out: *mut c_int) -> BekkStatus {
    if fit.is_null() || out.is_null() {
        set_error("null pointer");
        return BekkStatusNullArgument;
    }
    *out = c_int::from((*fit).converged);
    BekkStatusOk
}

/// One-step-ahead conditional covariance forecast from the end of `panel`,
/// written row-major into `out` (`n * n` doubles). `floor` is the
/// eigenvalue floor of the PSD projection.
///
/// # Safety
/// `fit` and `panel` must be live; `out` must hold `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn bekk_fit_forecast_sigma(
    fit: *const BekkFit,
    panel: *const BekkPanel,
    floor: c_double,
    out: *mut c_double,
    len: size_t,
) -> BekkStatus {
    if fit.is_null() || panel.is_null() || out.is_null() {
        set_error("null pointer");
        return BekkStatusNullArgument;
    }
    guard(|| {
        let fit = &*fit;
        let panel = &(*panel).inner;
        let n = fit.n_assets;
        if len != n * n {
            set_error(&format!("buffer holds {len} entries, need {}", n * n));
            return BekkStatusInvalidArgument;
        }
        let run = || -> Result<DMatrix<f64>, BekkError> {
            let x = regressor_at(panel, fit.theta.p(), fit.tau, panel.t())?;
            Ok(sigma_hat(&fit.theta, &x, floor)?.into_matrix())
        };
        match run() {
            Ok(sigma) => {
                let dst = std::slice::from_raw_parts_mut(out, len);
                for i in 0..n {
                    for j in 0..n {
                        dst[i * n + j] = sigma[(i, j)];
                    }
                }
                BekkStatusOk
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Recovers the BEKK coefficients from a fit. `ks` holds one component
/// count per lag; `use_te_loss` selects the top-eigenvalue loss instead of
/// the nuclear norm for the split search.
///
/// # Safety
/// `fit` must be live, `ks` must hold one entry per lag, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bekk_recover(
    fit: *const BekkFit,
    ks: *const size_t,
    ks_len: size_t,
    use_te_loss: c_int,
    adam_iters: size_t,
    floor: c_double,
    out: *mut *mut BekkCoefficients,
) -> BekkStatus {
    if fit.is_null() || ks.is_null() || out.is_null() {
        set_error("null pointer");
        return BekkStatusNullArgument;
    }
    guard(|| {
        let fit = &*fit;
        let ks = std::slice::from_raw_parts(ks, ks_len);
        let adam = AdamConfig {
            iters: if adam_iters > 0 { adam_iters } else { AdamConfig::default().iters },
            ..Default::default()
        };
        let loss = if use_te_loss != 0 { WLoss::TopEigen(1) } else { WLoss::Nuclear };
        match recover_bekk(&fit.theta, ks, loss, &adam, floor.max(0.0)) {
            Ok(params) => {
                *out = Box::into_raw(Box::new(BekkCoefficients { inner: params }));
                BekkStatusOk
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Frees recovered coefficients. Null is ignored.
///
/// # Safety
/// `params` must be a pointer returned by [`bekk_recover`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bekk_coefficients_free(params: *mut BekkCoefficients) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Asset dimension of recovered coefficients.
///
/// # Safety
/// `params` must be live.
#[no_mangle]
pub unsafe extern "C" fn bekk_coefficients_n(params: *const BekkCoefficients) -> size_t {
    if params.is_null() {
        return 0;
    }
    (*params).inner.n()
}

/// Lag order of recovered coefficients.
///
/// # Safety
/// `params` must be live.
#[no_mangle]
pub unsafe extern "C" fn bekk_coefficients_p(params: *const BekkCoefficients) -> size_t {
    if params.is_null() {
        return 0;
    }
    (*params).inner.p()
}

/// Copies the recovered intercept covariance row-major into `out`.
///
/// # Safety
/// `params` must be live; `out` must hold `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn bekk_coefficients_omega(
    params: *const BekkCoefficients,
    out: *mut c_double,
    len: size_t,
) -> BekkStatus {
    if params.is_null() || out.is_null() {
        set_error("null pointer");
        return BekkStatusNullArgument;
    }
    let omega = (*params).inner.omega.as_matrix();
    let n = omega.nrows();
    if len != n * n {
        set_error(&format!("buffer holds {len} entries, need {}", n * n));
        return BekkStatusInvalidArgument;
    }
    let dst = std::slice::from_raw_parts_mut(out, len);
    for i in 0..n {
        for j in 0..n {
            dst[i * n + j] = omega[(i, j)];
        }
    }
    BekkStatusOk
}

/// Copies component `k` (0-based) at `lag` (1-based) row-major into `out`.
///
/// # Safety
/// `params` must be live; `out` must hold `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn bekk_coefficients_component(
    params: *const BekkCoefficients,
    lag: size_t,
    k: size_t,
    out: *mut c_double,
    len: size_t,
) -> BekkStatus {
    if params.is_null() || out.is_null() {
        set_error("null pointer");
        return BekkStatusNullArgument;
    }
    let inner = &(*params).inner;
    if lag == 0 || lag > inner.p() || k >= inner.a[lag - 1].len() {
        set_error(&format!("no component {k} at lag {lag}"));
        return BekkStatusInvalidArgument;
    }
    let m = &inner.a[lag - 1][k];
    let n = m.nrows();
    if len != n * n {
        set_error(&format!("buffer holds {len} entries, need {}", n * n));
        return BekkStatusInvalidArgument;
    }
    let dst = std::slice::from_raw_parts_mut(out, len);
    for i in 0..n {
        for j in 0..n {
            dst[i * n + j] = m[(i, j)];
        }
    }
    BekkStatusOk
}
