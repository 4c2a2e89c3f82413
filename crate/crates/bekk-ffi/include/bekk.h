#ifndef BEKK_FFI_H
#define BEKK_FFI_H

/* Generated by cbindgen from the bekk-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible entry point.
typedef enum BekkStatus {
  BEKK_STATUS_OK = 0,
  BEKK_STATUS_NULL_ARGUMENT = 1,
  BEKK_STATUS_INVALID_ARGUMENT = 2,
  BEKK_STATUS_DATA_ERROR = 3,
  BEKK_STATUS_NUMERIC_ERROR = 4,
} BekkStatus;

// Opaque recovered BEKK coefficients.
typedef struct BekkCoefficients BekkCoefficients;

// Opaque fitted model: coefficient stack plus the settings it was fit at.
typedef struct BekkFit BekkFit;

// Opaque return panel.
typedef struct BekkPanel BekkPanel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread. The pointer
// stays valid until the next failing call on the same thread; do not free.
const char *bekk_last_error_message(void);

// Static library version string; do not free.
const char *bekk_version(void);

// Builds a panel from a row-major `rows x cols` buffer of returns.
// Returns null on invalid input (see [`bekk_last_error_message`]).
//
// # Safety
// `data` must point to at least `rows * cols` readable doubles.
struct BekkPanel *bekk_panel_new(const double *data, size_t rows, size_t cols);

// Frees a panel created by this library. Null is ignored.
//
// # Safety
// `panel` must be a pointer returned by this library and not yet freed.
void bekk_panel_free(struct BekkPanel *panel);

// Number of observations in the panel.
//
// # Safety
// `panel` must be a live pointer from [`bekk_panel_new`] or
// [`bekk_simulate`].
size_t bekk_panel_rows(const struct BekkPanel *panel);

// Number of assets in the panel.
//
// # Safety
// `panel` must be a live pointer from [`bekk_panel_new`] or
// [`bekk_simulate`].
size_t bekk_panel_cols(const struct BekkPanel *panel);

// Subtracts column means in place.
//
// # Safety
// `panel` must be a live pointer from this library.
enum BekkStatus bekk_panel_center(struct BekkPanel *panel);

// Simulates a BEKK-ARCH panel. `innovation`: 0 = Gaussian, 1 = Laplace,
// 2 = Student-t with `student_df` degrees of freedom. `ks` holds one
// component count per lag.
//
// # Safety
// `ks` must point to `p` readable entries and `out` must be a valid
// destination pointer.
enum BekkStatus bekk_simulate(size_t n,
                              size_t t,
                              size_t p,
                              size_t s,
                              const size_t *ks,
                              int innovation,
                              double student_df,
                              uint64_t seed,
                              size_t burn_in,
                              struct BekkPanel **out);

// Fits the truncated penalized regression at fixed `(p, lambda, tau)`.
// `tau = INFINITY` disables truncation. On success `out` owns a new fit.
//
// # Safety
// `panel` must be live and `out` a valid destination pointer.
enum BekkStatus bekk_fit(const struct BekkPanel *panel,
                         size_t p,
                         double lambda,
                         double tau,
                         double tol,
                         size_t block_size,
                         size_t max_iter,
                         struct BekkFit **out);

// Frees a fit. Null is ignored.
//
// # Safety
// `fit` must be a pointer returned by [`bekk_fit`] and not yet freed.
void bekk_fit_free(struct BekkFit *fit);

// Coefficient-stack dimensions: rows = p d + 1, cols = d.
//
// # Safety
// All pointers must be valid; `fit` must be live.
enum BekkStatus bekk_fit_dims(const struct BekkFit *fit, size_t *rows, size_t *cols);

// Copies the coefficient stack row-major into `out` (`len` doubles).
//
// # Safety
// `out` must point to at least `len` writable doubles; `fit` must be live.
enum BekkStatus bekk_fit_theta(const struct BekkFit *fit, double *out, size_t len);

// Maximum KKT violation at the fitted stack.
//
// # Safety
// `fit` must be live and `out` writable.
enum BekkStatus bekk_fit_kkt_residual(const struct BekkFit *fit, double *out);

// Whether every solver block converged within its iteration cap.
//
// # Safety
// `fit` must be live and `out` writable.
enum BekkStatus bekk_fit_converged(const struct BekkFit *fit, int *out);

// One-step-ahead conditional covariance forecast from the end of `panel`,
// written row-major into `out` (`n * n` doubles). `floor` is the
// eigenvalue floor of the PSD projection.
//
// # Safety
// `fit` and `panel` must be live; `out` must hold `n * n` doubles.
enum BekkStatus bekk_fit_forecast_sigma(const struct BekkFit *fit,
                                        const struct BekkPanel *panel,
                                        double floor,
                                        double *out,
                                        size_t len);

// Recovers the BEKK coefficients from a fit. `ks` holds one component
// count per lag; `use_te_loss` selects the top-eigenvalue loss instead of
// the nuclear norm for the split search.
//
// # Safety
// `fit` must be live, `ks` must hold one entry per lag, `out` valid.
enum BekkStatus bekk_recover(const struct BekkFit *fit,
                             const size_t *ks,
                             size_t ks_len,
                             int use_te_loss,
                             size_t adam_iters,
                             double floor,
                             struct BekkCoefficients **out);

// Frees recovered coefficients. Null is ignored.
//
// # Safety
// `params` must be a pointer returned by [`bekk_recover`], not yet freed.
void bekk_coefficients_free(struct BekkCoefficients *params);

// Asset dimension of recovered coefficients.
//
// # Safety
// `params` must be live.
size_t bekk_coefficients_n(const struct BekkCoefficients *params);

// Lag order of recovered coefficients.
//
// # Safety
// `params` must be live.
size_t bekk_coefficients_p(const struct BekkCoefficients *params);

// Copies the recovered intercept covariance row-major into `out`.
//
// # Safety
// `params` must be live; `out` must hold `n * n` doubles.
enum BekkStatus bekk_coefficients_omega(const struct BekkCoefficients *params,
                                        double *out,
                                        size_t len);

// Copies component `k` (0-based) at `lag` (1-based) row-major into `out`.
//
// # Safety
// `params` must be live; `out` must hold `n * n` doubles.
enum BekkStatus bekk_coefficients_component(const struct BekkCoefficients *params,
                                            size_t lag,
                                            size_t k,
                                            double *out,
                                            size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BEKK_FFI_H */
