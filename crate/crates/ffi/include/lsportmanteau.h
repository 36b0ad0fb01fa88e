#ifndef LSPORTMANTEAU_H
#define LSPORTMANTEAU_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Centre with the global product moment.
#define LSP_BANDWIDTH_GLOBAL 0

// Centre over `⌊T^{2/3}⌋` neighbours on each side.
#define LSP_BANDWIDTH_AUTO 1

// Centre over `bandwidth` neighbours on each side.
#define LSP_BANDWIDTH_FIXED 2

// Result codes of every fallible call.
typedef enum LspStatus {
  LSP_STATUS_OK = 0,
  LSP_STATUS_INVALID_ARGUMENT = 1,
  LSP_STATUS_PARSE_ERROR = 2,
  LSP_STATUS_DOMAIN_ERROR = 3,
  LSP_STATUS_IO_ERROR = 4,
  LSP_STATUS_NULL_POINTER = 5,
  LSP_STATUS_PANIC = 6,
} LspStatus;

// Opaque handle to a series of Fourier coefficient vectors.
typedef struct LspSeries LspSeries;

// Bootstrap settings. Obtain defaults from [`lsp_config_default`].
typedef struct LspTestConfig {
  size_t replicates;
  // Block length; 0 selects `⌊T^{1/3}⌋`.
  size_t block_len;
  // One of the `LSP_BANDWIDTH_*` constants.
  uint32_t bandwidth_mode;
  // Half-width used with `LSP_BANDWIDTH_FIXED`.
  size_t bandwidth;
  double alpha;
  uint64_t seed;
} LspTestConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *lsp_last_error(void);

// Library version as a static NUL-terminated string.
const char *lsp_version(void);

// Projects `len` curves sampled on a midpoint grid of `grid_size` points
// (row-major, one curve per row) onto the first `basis_dim` Fourier
// functions.
enum LspStatus lsp_series_from_grid(const double *values,
                                    size_t len,
                                    size_t grid_size,
                                    size_t basis_dim,
                                    struct LspSeries **out);

// Wraps `len` coefficient vectors of dimension `dim` (row-major).
enum LspStatus lsp_series_from_coefficients(const double *coef,
                                            size_t len,
                                            size_t dim,
                                            struct LspSeries **out);

// Simulates model `model` (`"N1"` .. `"N4"`, `"A1"` .. `"A6"`) and projects it.
// The sample equals the one produced by `lsportmanteau simulate --seed`.
enum LspStatus lsp_series_simulate(const char *model,
                                   size_t len,
                                   size_t grid_size,
                                   size_t burn_in,
                                   uint64_t seed,
                                   size_t basis_dim,
                                   struct LspSeries **out);

// Number of curves `T`; 0 for a null handle.
size_t lsp_series_len(const struct LspSeries *series);

// Basis dimension `D`; 0 for a null handle.
size_t lsp_series_dim(const struct LspSeries *series);

// Copies the `T × D` coefficients (row-major) into `out`.
enum LspStatus lsp_series_coefficients(const struct LspSeries *series, double *out, size_t out_len);

// Releases a handle. Null is ignored.
void lsp_series_free(struct LspSeries *series);

// Fills `config` with the defaults for a series of length `len`: 200
// replicates, block length `⌊T^{1/3}⌋`, global centring, `α = 0.05`, seed 0.
enum LspStatus lsp_config_default(size_t len, struct LspTestConfig *config);

// `‖M̂_h‖_{2,3}` for `h = 1..=max_lag`, written to `norms[0..max_lag]`.
enum LspStatus lsp_lag_norms(const struct LspSeries *series, size_t max_lag, double *norms);

// Bootstrap test of no serial correlation up to lag `max_lag`.
//
// `p_values[k]` receives the p-value for maximal lag `k + 1`. When not
// null, `statistics[k]` receives `√T ‖M̂_{k+1}‖_{2,3}` and `reject` the
// decision at level `α` for the full maximal lag.
enum LspStatus lsp_portmanteau_test(const struct LspSeries *series,
                                    size_t max_lag,
                                    const struct LspTestConfig *config,
                                    double *p_values,
                                    double *statistics,
                                    bool *reject);

// Bootstrap test of `‖M_h‖_{2,3} <= thresholds[h-1]` for all `h <= max_lag`
// (requires `α < 1/2`). Outputs as in [`lsp_portmanteau_test`], with
// `statistics[k] = √T (‖M̂‖ - Δ) ‖M̂‖` at lag `k + 1`.
enum LspStatus lsp_relevant_test(const struct LspSeries *series,
                                 size_t max_lag,
                                 const double *thresholds,
                                 const struct LspTestConfig *config,
                                 double *p_values,
                                 double *statistics,
                                 bool *reject);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LSPORTMANTEAU_H */
